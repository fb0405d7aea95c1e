"""Picard iteration for ``D^{1+alpha} u = phi(t, u)``, ``u(0) = U0``, ``u'(0) = U1`` on ``[0, T]``.

The fixed-point operator mirrors the ``lam = 0`` closed form:

    (N u)(t) = U0 + U1 t - int_0^t s G(s) ds + t int_0^t G(s) ds,
    G = (1 - alpha) d/dt phi(t, u(t)) + alpha phi(t, u(t)),

and is a contraction in the sup norm when ``q = 2T((1-alpha) L2 + alpha L1) < 1``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .cf_operator import CFOrder
from .errors import MaxIterationsExceeded, NotContractive, OrderOutOfRange
from .exprparse import Expr, differentiate, evaluate, parse
from .quadrature import Grid, GridFunction, cumulative_integral, derivative


@dataclass(frozen=True)
class NonlinearProblem:
    """Initial value problem data.

    ``phi(t, u)`` must accept numpy arrays. ``phi_t(t, u, du)``, if given,
    returns the total derivative of ``phi(t, u(t))`` along a trajectory with
    slope ``du``; otherwise that derivative is taken by finite differences.
    """

    order: CFOrder
    T: float
    phi: Callable
    L1: float
    L2: float
    U0: float = 0.0
    U1: float = 0.0
    n: int = 2001
    phi_t: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if self.L1 < 0 or self.L2 < 0:
            raise ValueError("Lipschitz constants must be non-negative")
        if not (0.0 < self.order.alpha < 1.0):
            raise OrderOutOfRange(f"Picard solver needs 0 < alpha < 1, got {self.order.alpha}")

    @property
    def grid(self) -> Grid:
        return Grid(0.0, float(self.T), self.n)

    @property
    def q(self) -> float:
        return contraction_check(self)

    @classmethod
    def from_expression(cls, order, T, phi: str | Expr, L1, L2, U0=0.0, U1=0.0, n=2001) -> NonlinearProblem:
        """Build ``phi`` and its exact total derivative ``phi_t + phi_u u'`` from an expression in t, u."""
        expr = parse(phi) if isinstance(phi, str) else phi
        d_t = differentiate(expr, "t")
        d_u = differentiate(expr, "u")

        def fn(t, u):
            return evaluate(expr, t, u)

        def fn_t(t, u, du):
            return evaluate(d_t, t, u) + evaluate(d_u, t, u) * du

        order = order if isinstance(order, CFOrder) else CFOrder(float(order))
        return cls(order, float(T), fn, float(L1), float(L2), float(U0), float(U1), int(n), fn_t)


@dataclass(frozen=True)
class PicardState:
    iterate: GridFunction
    iteration_count: int
    successive_diffs: tuple[float, ...]
    q: float

    @property
    def error_bound(self) -> float:
        """A-posteriori Banach estimate ``q / (1 - q) * last diff`` of the distance to the fixed point."""
        if not self.successive_diffs:
            return 0.0
        return self.q / (1.0 - self.q) * self.successive_diffs[-1]


def contraction_check(problem: NonlinearProblem) -> float:
    alpha = problem.order.alpha
    return 2.0 * problem.T * ((1.0 - alpha) * problem.L2 + alpha * problem.L1)


def _samples(values, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(values, dtype=float), (n,))


def apply_N(problem: NonlinearProblem, u: GridFunction) -> GridFunction:
    """One application of the fixed-point operator to the iterate ``u``."""
    grid = problem.grid
    if u.grid != grid:
        raise ValueError("iterate must be sampled on the problem grid [0, T]")
    alpha = problem.order.alpha
    t = grid.nodes
    phi = GridFunction(grid, _samples(problem.phi(t, u.values), grid.n))
    if problem.phi_t is None:
        dphi = derivative(phi).values
    else:
        dphi = _samples(problem.phi_t(t, u.values, derivative(u).values), grid.n)
    G = GridFunction(grid, (1.0 - alpha) * dphi + alpha * phi.values)
    out = problem.U0 + problem.U1 * t - cumulative_integral(G * t).values + t * cumulative_integral(G).values
    return GridFunction(grid, out, name="u")


def picard_solve(
    problem: NonlinearProblem,
    tol: float = 1e-10,
    max_iter: int = 100,
    u_init: GridFunction | None = None,
) -> tuple[GridFunction, PicardState]:
    """Iterate ``u <- N u`` from ``U0 + U1 t`` (or ``u_init``) until the sup-norm step is at most ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    q = contraction_check(problem)
    if q >= 1.0:
        raise NotContractive(q)
    grid = problem.grid
    u = u_init if u_init is not None else GridFunction(grid, problem.U0 + problem.U1 * grid.nodes)
    diffs: list[float] = []
    for k in range(1, max_iter + 1):
        nxt = apply_N(problem, u)
        diffs.append(float(np.max(np.abs(nxt.values - u.values))))
        u = nxt
        if diffs[-1] <= tol:
            return u, PicardState(u, k, tuple(diffs), q)
    raise MaxIterationsExceeded(max_iter, diffs[-1])
