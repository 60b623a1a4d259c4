"""Plain-text rendering of expressions.

Output uses the same surface grammar the parser accepts, so for a canonical
expression ``e`` the round trip ``parse(format_expr(e))`` normalizes back to
``e``.  Symbol spelling is pluggable through a ``namer`` callable; problem
documents supply namers that use either initial-data names (``c``, ``c_xx``)
or field names (``u``, ``u_xx``).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

from .expr import Add, Const, Expr, Func, Mul, Pow, Sym, Symbol, SymbolKind

SPACE_LETTERS = ("x", "y", "z")


def space_letter(index: int) -> str:
    if index < len(SPACE_LETTERS):
        return SPACE_LETTERS[index]
    return f"x{index}"


def jet_suffix(orders: tuple[int, ...]) -> str:
    return "".join(space_letter(j) * k for j, k in enumerate(orders))


def default_namer(symbol: Symbol) -> str:
    if symbol.kind == SymbolKind.TIME:
        return "t"
    if symbol.kind == SymbolKind.AUX:
        return "s"
    if symbol.kind == SymbolKind.INITIAL_TIME:
        return "a"
    if symbol.kind == SymbolKind.SPACE:
        return space_letter(symbol.index)
    if symbol.kind == SymbolKind.JET:
        base = "c" if symbol.index == 0 else f"c{symbol.index + 1}"
        suffix = jet_suffix(symbol.orders)
        return f"{base}_{suffix}" if suffix else base
    if symbol.kind == SymbolKind.PARAM:
        return symbol.name
    raise ValueError(f"unnamable symbol {symbol!r}")


def _format_const(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def format_expr(e: Expr, namer: Callable[[Symbol], str] = default_namer) -> str:
    """Render ``e``; parenthesization follows operator precedence."""

    def atom(node: Expr) -> str:
        # rendering of a node in a position that requires atom precedence
        text = walk(node)
        if isinstance(node, (Sym, Func)):
            return text
        if isinstance(node, Const) and node.value >= 0 and node.value.denominator == 1:
            return text
        return f"({text})"

    def factor(node: Expr) -> str:
        # rendering of a node appearing as a factor of a product
        if isinstance(node, Add):
            return f"({walk(node)})"
        if isinstance(node, Const) and node.value < 0:
            return f"({walk(node)})"
        return walk(node)

    def strip_neg(node: Expr) -> tuple[int, Expr]:
        # pull a leading minus sign out of a constant or product
        if isinstance(node, Const) and node.value < 0:
            return -1, Const(-node.value)
        if isinstance(node, Mul) and node.factors:
            head = node.factors[0]
            if isinstance(head, Const) and head.value < 0:
                rest = node.factors[1:]
                if not rest:
                    return -1, Const(-head.value)
                if head.value == -1:
                    return -1, rest[0] if len(rest) == 1 else Mul(rest)
                return -1, Mul((Const(-head.value), *rest))
        return 1, node

    def split_sign(node: Expr) -> tuple[int, str]:
        sign, magnitude = strip_neg(node)
        return sign, walk(magnitude)

    def walk(node: Expr) -> str:
        if isinstance(node, Const):
            return _format_const(node.value)
        if isinstance(node, Sym):
            return namer(node.symbol)
        if isinstance(node, Func):
            return f"{node.name}({walk(node.arg)})"
        if isinstance(node, Pow):
            if node.exponent >= 0:
                return f"{atom(node.base)}^{node.exponent}"
            return f"{atom(node.base)}^({node.exponent})"
        if isinstance(node, Mul):
            if not node.factors:
                return "1"
            head = node.factors[0]
            if isinstance(head, Const) and head.value < 0:
                sign, magnitude = strip_neg(node)
                return f"-{atom(magnitude)}" if isinstance(magnitude, Add) \
                    else f"-{walk(magnitude)}"
            return "*".join(factor(f) for f in node.factors)
        if isinstance(node, Add):
            if not node.terms:
                return "0"
            sign, text = split_sign(node.terms[0])
            out = [f"-{text}" if sign < 0 else text]
            for term in node.terms[1:]:
                sign, text = split_sign(term)
                out.append(f" - {text}" if sign < 0 else f" + {text}")
            return "".join(out)
        raise TypeError(f"not an expression node: {node!r}")

    return walk(e)
