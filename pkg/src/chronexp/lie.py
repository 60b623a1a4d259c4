"""Lie-series construction of Cauchy-problem solutions.

For du_i/dt + F_i = 0 with u_i = c_i at t = a, the solution is generated by
iterating the derivation

    A[e] = sum_j sum_alpha D_x^alpha(F_j(s, x, jets)) * de/dJet(j, alpha)
           - de/ds,

on the seed c_i and reading off Taylor coefficients

    C_{i,n} = (-1)^n / n! * (A^n[c_i]) with s replaced by a,

so that u_i = sum_n C_{i,n} (t - a)^n.  For ODEs and systems the alpha-sum
collapses to the bare initial-data symbols; for PDEs it is the evolutionary
prolongation over exactly the jets present in the operand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ExpressionBlowup, NonPolynomialRhs
from .expr import (
    AUX,
    Add,
    Const,
    Expr,
    Fraction,
    Mul,
    Pow,
    Sym,
    Symbol,
    SymbolKind,
    TIME,
    ZERO,
    _terms,
    coefficients_in,
    diff,
    eval_num,
    jet,
    jets_of,
    normalize,
    space_var,
    subst,
    subst_many,
    symbols_of,
    term_count,
)
from .parser import ProblemSpec

DEFAULT_TERM_BUDGET = 10 ** 6


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
    """The derivation A for one problem: right-hand sides with the time
    symbol renamed to the auxiliary symbol, plus the -d/ds term.
    """

    problem: ProblemSpec
    substituted_rhs: tuple[Expr, ...]
    _dcache: dict = field(default_factory=dict, compare=False, repr=False)

    def derived_rhs(self, index: int, orders: tuple[int, ...]) -> Expr:
        """D_x^orders applied to F_index, memoized order by order."""
        key = (index, orders)
        hit = self._dcache.get(key)
        if hit is not None:
            return hit
        if not any(orders):
            value = self.substituted_rhs[index]
        else:
            j = next(i for i, k in enumerate(orders) if k)
            lower = tuple(k - 1 if i == j else k for i, k in enumerate(orders))
            value = total_derivative(self.derived_rhs(index, lower), j)
        self._dcache[key] = value
        return value


def build_generator(p: ProblemSpec) -> Generator:
    substituted = tuple(subst(f, TIME, Sym(AUX)) for f in p.rhs)
    return Generator(p, substituted)


def total_derivative(e: Expr, space_index: int) -> Expr:
    """Total space derivative on jet expressions:
    D_{x_j} e = de/dx_j + sum over jets of Jet(k, alpha+e_j) * de/dJet(k, alpha).
    """
    pieces = [diff(e, space_var(space_index))]
    for jsym in jets_of(e):
        bumped = tuple(
            k + 1 if i == space_index else k for i, k in enumerate(jsym.orders))
        pieces.append(Mul((Sym(jet(jsym.index, bumped)), diff(e, jsym))))
    return normalize(Add(tuple(pieces)))


def apply_generator(g: Generator, e: Expr) -> Expr:
    """One application of the derivation A (see module docstring).  The
    jet-sum runs over exactly the jets occurring in ``e``.
    """
    pieces = [Mul((Const(Fraction(-1)), diff(e, AUX)))]
    for jsym in jets_of(e):
        rate = g.derived_rhs(jsym.index, jsym.orders)
        pieces.append(Mul((rate, diff(e, jsym))))
    return normalize(Add(tuple(pieces)))


# ---------------------------------------------------------------------------
# Series solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesSolution:
    """Per-field Taylor coefficients C_{i,n} of the solution around t = a:
    u_i is approximated by sum_n C_{i,n} (t - a)^n.
    """

    problem: ProblemSpec
    expansion_point: Expr
    order: int
    coeffs: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        forbidden = (SymbolKind.TIME, SymbolKind.AUX)
        for i, column in enumerate(self.coeffs):
            if len(column) != self.order + 1:
                raise ValueError("coefficient column length mismatch")
            if column[0] != Sym(self.problem.jet_symbol(i)):
                raise ValueError("order-0 coefficient must be the initial datum")
            for c in column:
                if any(s.kind in forbidden for s in symbols_of(c)):
                    raise ValueError("coefficients must not contain t or s")


def _series_chain(g: Generator, seed: Expr, order: int,
                  term_budget: int) -> list[Expr]:
    """[(-1)^n/n! A^n[seed] at s=a] for n = 0..order."""
    point = g.problem.initial_time
    out: list[Expr] = []
    current = normalize(seed)
    sign = Fraction(1)
    for n in range(order + 1):
        if term_count(current) > term_budget:
            raise ExpressionBlowup(
                f"series term at order {n} exceeds {term_budget} monomials")
        scaled = Mul((Const(sign / math.factorial(n)), current))
        out.append(subst(scaled, AUX, point))
        if n < order:
            current = apply_generator(g, current)
            sign = -sign
    return out


def lie_coefficients(g: Generator, order: int,
                     term_budget: int = DEFAULT_TERM_BUDGET) -> SeriesSolution:
    """Truncated Lie-series solution for every field of g's problem."""
    columns = []
    for i in range(g.problem.n_fields):
        seed = Sym(g.problem.jet_symbol(i))
        columns.append(tuple(_series_chain(g, seed, order, term_budget)))
    return SeriesSolution(
        problem=g.problem,
        expansion_point=g.problem.initial_time,
        order=order,
        coeffs=tuple(columns),
    )


def apply_series_to_function(g: Generator, G: Expr, order: int,
                             term_budget: int = DEFAULT_TERM_BUDGET) -> list[Expr]:
    """Lie series seeded with an arbitrary jet expression G instead of c_i;
    coefficient list [G_0, ..., G_order].  Seeding with a bare c_i
    reproduces the corresponding lie_coefficients column.
    """
    return _series_chain(g, G, order, term_budget)


def eval_series(sol: SeriesSolution, t_value: float,
                initial_data: dict[Symbol, float]) -> list[float]:
    """Horner evaluation of every field's series at time t_value.

    initial_data must bind every jet symbol occurring in the coefficients
    (plus space variables, parameters, and the symbolic initial time when
    those occur).
    """
    a_value = eval_num(sol.expansion_point, initial_data)
    dt = t_value - a_value
    out = []
    for column in sol.coeffs:
        acc = 0.0
        for coeff in reversed(column):
            acc = acc * dt + eval_num(coeff, initial_data)
        out.append(acc)
    return out


def initial_jet_bindings(sol: SeriesSolution, initial_exprs: list[Expr],
                         space_values: list[float]) -> dict[Symbol, float]:
    """Bindings for eval_series from closed-form initial data.

    initial_exprs[k] is the initial function of field k in the space
    variables; every jet needed by the coefficients is computed by repeated
    symbolic differentiation and evaluated at space_values.
    """
    problem = sol.problem
    bind: dict[Symbol, float] = {}
    for j, value in enumerate(space_values):
        bind[space_var(j)] = value
    needed: set[Symbol] = set()
    for column in sol.coeffs:
        for coeff in column:
            needed |= jets_of(coeff)
    for k in range(problem.n_fields):
        needed.add(problem.jet_symbol(k))
    derivative_cache: dict[tuple[int, tuple[int, ...]], Expr] = {}

    def derivative(k: int, orders: tuple[int, ...]) -> Expr:
        key = (k, orders)
        hit = derivative_cache.get(key)
        if hit is not None:
            return hit
        if not any(orders):
            value = normalize(initial_exprs[k])
        else:
            j = next(i for i, n in enumerate(orders) if n)
            lower = tuple(n - 1 if i == j else n for i, n in enumerate(orders))
            value = diff(derivative(k, lower), space_var(j))
        derivative_cache[key] = value
        return value

    for jsym in needed:
        expr = derivative(jsym.index, jsym.orders)
        bind[jsym] = eval_num(expr, bind)
    return bind


# ---------------------------------------------------------------------------
# Taylor extraction and the defining-equation residual
# ---------------------------------------------------------------------------

def taylor_coefficients(e: Expr, point: Expr, order: int) -> list[Expr]:
    """Exact coefficients of (t - point)^n, n = 0..order, for an expression
    in the time symbol.  Polynomials are read off directly; otherwise the
    coefficients come from repeated differentiation.
    """
    shifted = subst(e, TIME, Add((Sym(TIME), point)))
    try:
        coeffs = coefficients_in(shifted, TIME)
        coeffs = coeffs[:order + 1]
    except NonPolynomialRhs:
        coeffs = []
        current = shifted
        for n in range(order + 1):
            at_zero = subst(current, TIME, ZERO)
            coeffs.append(normalize(
                Mul((Const(Fraction(1, math.factorial(n))), at_zero))))
            if n < order:
                current = diff(current, TIME)
    while len(coeffs) < order + 1:
        coeffs.append(ZERO)
    return coeffs


def assemble_series(sol: SeriesSolution, index: int) -> Expr:
    """The truncated series of field ``index`` as an expression in t."""
    tau = Add((Sym(TIME), Mul((Const(Fraction(-1)), sol.expansion_point))))
    parts = [Mul((coeff, Pow(tau, n))) if n else coeff
             for n, coeff in enumerate(sol.coeffs[index])]
    return normalize(Add(tuple(parts)))


@dataclass(frozen=True)
class ResidualReport:
    """Per-order exactness of du/dt + F = 0 for a truncated series."""

    field_names: tuple[str, ...]
    checked_orders: int              # residual coefficients 0..checked_orders-1
    passed: bool
    failing_order: int | None        # 1-based series order whose relation broke
    failing_field: str | None

    def summary(self) -> str:
        if self.passed:
            return (f"residual zero through order {self.checked_orders - 1} "
                    f"for fields {', '.join(self.field_names)}")
        return (f"residual nonzero for field {self.failing_field} at series "
                f"order {self.failing_order}")


def residual_check(sol: SeriesSolution,
                   against: ProblemSpec | None = None) -> ResidualReport:
    """Verify the defining equation order by order.

    The residual d/dt(series) + F(t, x, series, jets-of-series) must have
    exactly-zero coefficients of (t-a)^n for n < sol.order.  ``against``
    substitutes a different problem's right-hand sides (same shape), which
    is how an external fixture is cross-checked against a trusted form.
    """
    problem = sol.problem
    rhs_source = against if against is not None else problem
    if (len(rhs_source.field_names) != problem.n_fields
            or len(rhs_source.space_names) != len(problem.space_names)):
        raise ValueError("problem shapes differ, residual is not comparable")

    assembled = [assemble_series(sol, i) for i in range(problem.n_fields)]
    derivative_cache: dict[Symbol, Expr] = {}

    def series_jet(jsym: Symbol) -> Expr:
        hit = derivative_cache.get(jsym)
        if hit is not None:
            return hit
        if not any(jsym.orders):
            value = assembled[jsym.index]
        else:
            j = next(i for i, n in enumerate(jsym.orders) if n)
            lower = jet(jsym.index, tuple(
                n - 1 if i == j else n for i, n in enumerate(jsym.orders)))
            value = total_derivative(series_jet(lower), j)
        derivative_cache[jsym] = value
        return value

    failing_order = None
    failing_field = None
    for i in range(problem.n_fields):
        rhs = rhs_source.rhs[i]
        replacement = {jsym: series_jet(jsym) for jsym in jets_of(rhs)}
        residual = normalize(
            Add((diff(assembled[i], TIME), subst_many(rhs, replacement))))
        coeffs = taylor_coefficients(residual, sol.expansion_point,
                                     sol.order - 1)
        for n, coeff in enumerate(coeffs):
            if coeff != ZERO:
                if failing_order is None or n + 1 < failing_order:
                    failing_order = n + 1
                    failing_field = problem.field_names[i]
                break
    return ResidualReport(
        field_names=problem.field_names,
        checked_orders=sol.order,
        passed=failing_order is None,
        failing_order=failing_order,
        failing_field=failing_field,
    )


# ---------------------------------------------------------------------------
# Homomorphism check: series of G(c) versus G applied to the series
# ---------------------------------------------------------------------------

def _series_mul(a: list[Expr], b: list[Expr], order: int) -> list[Expr]:
    out = []
    for n in range(order + 1):
        parts = [Mul((a[i], b[n - i]))
                 for i in range(n + 1) if i < len(a) and n - i < len(b)]
        out.append(normalize(Add(tuple(parts))) if parts else ZERO)
    return out


def compose_with_series(G: Expr, jet_series: dict[Symbol, list[Expr]],
                        order: int) -> list[Expr]:
    """Substitute truncated series for the jets of a polynomial G and expand,
    keeping coefficients through the given order.
    """
    total = [ZERO] * (order + 1)
    for mono, coeff in _terms(normalize(G)).items():
        term = [Const(coeff)] + [ZERO] * order
        for atom, k in mono:
            if isinstance(atom, Sym) and atom.symbol.kind == SymbolKind.JET:
                if k < 0:
                    raise NonPolynomialRhs(
                        "negative jet power is not polynomial")
                series = jet_series[atom.symbol]
                for _ in range(k):
                    term = _series_mul(term, series, order)
            elif jets_of(atom):
                raise NonPolynomialRhs(
                    f"atom {atom!r} hides jets inside a non-polynomial node")
            else:
                constant = normalize(Pow(atom, k))
                term = [normalize(Mul((constant, t))) for t in term]
        total = [normalize(Add((t, extra))) for t, extra in zip(total, term)]
    return total


@dataclass(frozen=True)
class HomomorphismReport:
    """Exact per-order comparison of the series of G(jets) against G
    composed with the per-jet series (the conjugation property of the
    evolution operator on multiplication operators).
    """

    order: int
    orders_equal: tuple[bool, ...]
    passed: bool
    failing_order: int | None

    def summary(self) -> str:
        if self.passed:
            return f"homomorphism exact through order {self.order}"
        return f"homomorphism broken at order {self.failing_order}"


def check_homomorphism(g: Generator, G: Expr, order: int,
                       term_budget: int = DEFAULT_TERM_BUDGET) -> HomomorphismReport:
    """Compare apply_series_to_function(g, G) with the composition of G and
    the per-jet series, order by order, as exact trees.
    """
    lhs = apply_series_to_function(g, G, order, term_budget)
    jet_series = {
        jsym: apply_series_to_function(g, Sym(jsym), order, term_budget)
        for jsym in jets_of(normalize(G))
    }
    rhs = compose_with_series(G, jet_series, order)
    equal = tuple(l == r for l, r in zip(lhs, rhs))
    failing = next((n for n, ok in enumerate(equal) if not ok), None)
    return HomomorphismReport(
        order=order,
        orders_equal=equal,
        passed=failing is None,
        failing_order=failing,
    )
