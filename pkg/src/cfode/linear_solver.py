"""Closed-form solution of ``D^{1+alpha} u - lam u = f`` with the CF derivative.

The substitution ``v(t) = u(t) exp(r (t - a))``, ``r = alpha / (1 - alpha)``,
turns the fractional equation into the constant-coefficient ODE

    v'' - mu1 v' + mu2 v = g,   mu1 = 2r + lam (1 - alpha),   mu2 = r^2,
    g = [(1 - alpha) f' + alpha f] exp(r (t - a)),

whose characteristic discriminant is ``4 lam alpha + lam^2 (1 - alpha)^2``.
Its general solution is written by variation of parameters with every
indefinite integral taken as a cumulative trapezoid integral from ``a``; the
two free constants are then fitted to ``u(a)`` and ``u'(a)``.

Note that the CF derivative vanishes at ``t = a``, so the fractional equation
itself also imposes ``lam u(a) + f(a) = 0``. The constructed ``u`` solves the
reduced ODE for any initial data; when that compatibility condition fails,
``Solution.residual_norm`` reports the leftover ``|lam u(a)|`` exactly as the
substitution check would.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .cf_operator import CFOrder, cf_d_beta, cf_d_gamma
from .errors import (
    CFOdeError,
    DegenerateLeadingCoefficient,
    NonzeroForcingAtStart,
    OrderOutOfRange,
    SingularConstantFit,
)
from .exprparse import Expr, differentiate, evaluate, parse
from .quadrature import Grid, GridFunction, cumulative_integral, derivative

# below this sqrt(|discriminant|) the two-exponential form cancels catastrophically
ROOT_SPLIT_MIN = 1e-6


class CaseTag(str, enum.Enum):
    DEGENERATE = "degenerate"
    POSITIVE = "positive"
    NEGATIVE = "negative"


def _check_order(order: CFOrder) -> float:
    if not (0.0 < order.alpha < 1.0):
        raise OrderOutOfRange(f"the closed-form solver needs 0 < alpha < 1, got {order.alpha}")
    return order.alpha


def _classify(disc: float, scale: float) -> CaseTag:
    if abs(disc) <= 1e-12 * max(1.0, scale):
        return CaseTag.DEGENERATE
    return CaseTag.POSITIVE if disc > 0 else CaseTag.NEGATIVE


@dataclass(frozen=True)
class LinearProblem:
    """Data of ``D^{1+alpha} u - lam u = f`` on ``[a, t1]`` with ``u(a)``, ``u'(a)``."""

    order: CFOrder
    lam: float
    f: GridFunction
    f_prime: GridFunction
    u_a: float = 0.0
    up_a: float = 0.0

    def __post_init__(self):
        if self.f.grid != self.f_prime.grid:
            raise ValueError("f and f_prime must share one grid")
        if not math.isfinite(self.lam):
            raise ValueError("lambda must be finite")

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def a(self) -> float:
        return self.grid.t0

    @classmethod
    def from_expression(cls, order, lam, f: str | Expr, grid: Grid, u_a=0.0, up_a=0.0) -> LinearProblem:
        """Forcing given as an expression in ``t``; ``f'`` is differentiated symbolically."""
        expr = parse(f, variables=("t",)) if isinstance(f, str) else f
        t = grid.nodes
        fv = GridFunction(grid, evaluate(expr, t), name="f")
        fp = GridFunction(grid, evaluate(differentiate(expr, "t"), t), name="f_prime")
        return cls(_order(order), float(lam), fv, fp, float(u_a), float(up_a))

    @classmethod
    def from_samples(cls, order, lam, f: GridFunction, u_a=0.0, up_a=0.0) -> LinearProblem:
        """Sampled forcing; ``f'`` comes from finite differences."""
        return cls(_order(order), float(lam), f, derivative(f), float(u_a), float(up_a))


def _order(order) -> CFOrder:
    return order if isinstance(order, CFOrder) else CFOrder(float(order))


@dataclass(frozen=True)
class ReducedODE:
    """``v'' - mu1 v' + mu2 v = g`` for ``v = u exp(r (t - a))``."""

    mu1: float
    mu2: float
    g: GridFunction
    discriminant: float
    case_tag: CaseTag


@dataclass(frozen=True)
class Solution:
    u: GridFunction
    constants: tuple[float, float]
    case_tag: CaseTag
    residual_norm: float
    formula: str


def discriminant_case(order: CFOrder, lam: float) -> tuple[float, CaseTag]:
    """Return ``A(lam) = 4 lam alpha + lam^2 (1-alpha)^2`` and its sign class.

    The degenerate class covers ``lam = 0`` and ``lam = -4 alpha / (1-alpha)^2``
    with a relative tolerance of ``1e-12 max(1, lam^2)``.
    """
    alpha = _check_order(order)
    disc = 4.0 * lam * alpha + lam**2 * (1.0 - alpha) ** 2
    if lam == 0.0:
        return 0.0, CaseTag.DEGENERATE
    return disc, _classify(disc, lam**2)


def reduce(problem: LinearProblem) -> ReducedODE:
    alpha = _check_order(problem.order)
    r = problem.order.rate
    lam = problem.lam
    mu1 = 2.0 * r + lam * (1.0 - alpha)
    mu2 = r * r
    tau = problem.grid.nodes - problem.a
    g = ((1.0 - alpha) * problem.f_prime.values + alpha * problem.f.values) * np.exp(r * tau)
    disc, tag = discriminant_case(problem.order, lam)
    return ReducedODE(mu1, mu2, GridFunction(problem.grid, g, name="g"), disc, tag)


# --------------------------------------------------------------------------
# variation of parameters for y'' + p1 y' + p0 y = rhs


@dataclass(frozen=True)
class _Branch:
    name: str
    # fundamental pair: (samples, value at a, slope at a)
    basis: tuple[tuple[np.ndarray, float, float], ...]
    # particular solution: sum of outer(tau) * int_a^t weight(s) rhs(s) ds
    terms: tuple[tuple[np.ndarray, float, float, np.ndarray], ...]


def _repeated(root: float, tau: np.ndarray) -> _Branch:
    e = np.exp(root * tau)
    w = np.exp(-root * tau)
    return _Branch(
        "repeated_root",
        basis=((e, 1.0, root), (tau * e, 0.0, 1.0)),
        terms=((-e, -1.0, -root, tau * w), (tau * e, 0.0, 1.0, w)),
    )


def _real(r1: float, r2: float, tau: np.ndarray) -> _Branch:
    split = r1 - r2
    e1, e2 = np.exp(r1 * tau), np.exp(r2 * tau)
    return _Branch(
        "real_roots",
        basis=((e1, 1.0, r1), (e2, 1.0, r2)),
        terms=(
            (e1 / split, 1.0 / split, r1 / split, np.exp(-r1 * tau)),
            (-e2 / split, -1.0 / split, -r2 / split, np.exp(-r2 * tau)),
        ),
    )


def _complex(rho: float, omega: float, tau: np.ndarray) -> _Branch:
    e = np.exp(rho * tau)
    c, s = np.cos(omega * tau), np.sin(omega * tau)
    w = np.exp(-rho * tau)
    return _Branch(
        "complex_roots",
        basis=((e * c, 1.0, rho), (e * s, 0.0, omega)),
        terms=(
            (-e * c / omega, -1.0 / omega, -rho / omega, w * s),
            (e * s / omega, 0.0, 1.0, w * c),
        ),
    )


def _branch(p1: float, p0: float, tag: CaseTag, tau: np.ndarray) -> _Branch:
    disc = p1 * p1 - 4.0 * p0
    if tag is CaseTag.DEGENERATE or math.sqrt(abs(disc)) < ROOT_SPLIT_MIN:
        return _repeated(-0.5 * p1, tau)
    if tag is CaseTag.POSITIVE:
        sq = math.sqrt(disc)
        return _real(0.5 * (-p1 + sq), 0.5 * (-p1 - sq), tau)
    return _complex(-0.5 * p1, 0.5 * math.sqrt(-disc), tau)


def _vop_solve(p1: float, p0: float, rhs: GridFunction, y0: float, dy0: float, tag: CaseTag):
    tau = rhs.grid.nodes - rhs.grid.t0
    br = _branch(p1, p0, tag, tau)
    particular = np.zeros_like(tau)
    slope0 = 0.0
    for outer, outer0, outer_slope0, weight in br.terms:
        integral = cumulative_integral(rhs * weight).values
        particular += outer * integral
        # Leibniz rule at t = a; the integral term is zero there
        slope0 += outer_slope0 * integral[0] + outer0 * weight[0] * rhs.values[0]
    system = np.array([[b0, b1] for _, b0, b1 in br.basis]).T
    target = np.array([y0 - particular[0], dy0 - slope0])
    det = np.linalg.det(system)
    if not abs(det) > 1e-14 * max(1.0, np.abs(system).max() ** 2):
        raise SingularConstantFit(f"initial-condition system is singular (det={det:.3e})")
    consts = np.linalg.solve(system, target)
    y = particular + consts[0] * br.basis[0][0] + consts[1] * br.basis[1][0]
    return y, (float(consts[0]), float(consts[1])), br.name


def linear_residual(u: GridFunction, order: CFOrder, lam: float, f: GridFunction) -> GridFunction:
    """``D^{1+alpha} u - lam u - f`` at every node, from numerical CF differentiation."""
    res = cf_d_beta(u, order) - lam * u - f
    return res.with_values(res.values, name="residual")


def solve(problem: LinearProblem) -> Solution:
    """Solve the linear problem with the branch formula selected by the discriminant."""
    fa = abs(problem.f.values[0])
    if fa > 1e-12 * problem.f.max_norm():
        raise NonzeroForcingAtStart(fa)
    red = reduce(problem)
    r = problem.order.rate
    v, consts, formula = _vop_solve(
        -red.mu1, red.mu2, red.g, problem.u_a, problem.up_a + r * problem.u_a, red.case_tag
    )
    tau = problem.grid.nodes - problem.a
    u = GridFunction(problem.grid, v * np.exp(-r * tau), name="u")
    residual = linear_residual(u, problem.order, problem.lam, problem.f)
    return Solution(u, consts, red.case_tag, residual.max_norm(), formula)


# --------------------------------------------------------------------------
# a D^{1+alpha} u + b D^{alpha} u + c u = h


@dataclass(frozen=True)
class GeneralReduction:
    """``v'' + p1 v' + p0 v = rhs`` for ``v = u exp(r (t - t0))``."""

    order: CFOrder
    p1: float
    p0: float
    rhs: GridFunction
    case_tag: CaseTag

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return (1.0, self.p1, self.p0)

    def solve(self, u0: float = 0.0, du0: float = 0.0) -> GridFunction:
        """Solve for ``u`` with ``u(t0) = u0``, ``u'(t0) = du0``."""
        r = self.order.rate
        v, _, _ = _vop_solve(self.p1, self.p0, self.rhs, u0, du0 + r * u0, self.case_tag)
        tau = self.rhs.grid.nodes - self.rhs.grid.t0
        return GridFunction(self.rhs.grid, v * np.exp(-r * tau), name="u")


def _general_coefficients(a_coef, b_coef, c_coef, alpha):
    # apply (1-alpha) d/dt + alpha to the equation, which turns both CF terms into
    # classical derivatives: a u'' + (b + c(1-alpha)) u' + c alpha u = (1-alpha) h' + alpha h
    r = alpha / (1.0 - alpha)
    damping = (b_coef + c_coef * (1.0 - alpha)) / a_coef
    stiffness = c_coef * alpha / a_coef
    p1 = damping - 2.0 * r
    p0 = r * r - damping * r + stiffness
    return p1, p0


def reduce_general(a_coef, b_coef, c_coef, order: CFOrder, h: GridFunction, h_prime: GridFunction, check: bool = True) -> GeneralReduction:
    """Reduce ``a D^{1+alpha} u + b D^{alpha} u + c u = h`` to a second-order ODE in ``v``.

    With ``check`` the coefficient formulas are validated by a residual
    self-test (see :func:`reduction_self_test`) before returning. A solution
    of the reduced ODE solves the original equation when additionally
    ``c u(t0) = h(t0)``.
    """
    order = _order(order)
    alpha = _check_order(order)
    if a_coef == 0:
        raise DegenerateLeadingCoefficient("a = 0 leaves a first-order CF equation")
    if h.grid != h_prime.grid:
        raise ValueError("h and h_prime must share one grid")
    p1, p0 = _general_coefficients(a_coef, b_coef, c_coef, alpha)
    r = order.rate
    tau = h.grid.nodes - h.grid.t0
    rhs = ((1.0 - alpha) * h_prime.values + alpha * h.values) * np.exp(r * tau) / a_coef
    disc = p1 * p1 - 4.0 * p0
    red = GeneralReduction(order, p1, p0, GridFunction(h.grid, rhs, name="rhs"), _classify(disc, p1 * p1 + abs(p0)))
    if check:
        defect = reduction_self_test(a_coef, b_coef, c_coef, order)
        if defect > 1e-4:
            raise CFOdeError(f"reduction self-test failed: residual {defect:.3e}")
    return red


def reduction_self_test(a_coef, b_coef, c_coef, order: CFOrder, grid: Grid | None = None) -> float:
    """Residual of the reduced general equation on a sample problem.

    Solves with ``h = t^2 exp(-t)`` and zero initial data, maps back to ``u``
    and returns the max-norm of ``a D^{1+alpha} u + b D^{alpha} u + c u - h``
    divided by ``max(1, |a D^{1+alpha} u|, |b D^{alpha} u|, |c u|)``.
    """
    order = _order(order)
    grid = grid or Grid(0.0, 2.0, 4001)
    tau = grid.nodes - grid.t0
    h = GridFunction(grid, tau**2 * np.exp(-tau))
    hp = GridFunction(grid, (2.0 * tau - tau**2) * np.exp(-tau))
    u = reduce_general(a_coef, b_coef, c_coef, order, h, hp, check=False).solve(0.0, 0.0)
    parts = [a_coef * cf_d_beta(u, order), b_coef * cf_d_gamma(u, order.alpha), c_coef * u]
    scale = max([1.0] + [p.max_norm() for p in parts])
    return (parts[0] + parts[1] + parts[2] - h).max_norm() / scale
