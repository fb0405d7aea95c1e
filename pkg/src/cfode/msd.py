"""Fractional mass-spring-damper equation

    m / s^(2(1-g)) D^{2g} x + delta / s^(1-g) D^{g} x + k x = F(t),   0 < g < 1,

with ``s`` the auxiliary time constant ``sigma`` and CF derivatives of order
``g = gamma`` and ``2 gamma``. Integrating by parts and substituting
``y = x exp(r t)``, ``r = gamma / (1 - gamma)``, gives the second-kind Volterra
equation

    y(t) + int_0^t y(s) [A + B (t - s)] ds = F1(t),

which is marched with trapezoid product integration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cf_operator import cf_d_2gamma, cf_d_gamma, kernel_rate
from .errors import NearSingularStep, SolvabilityViolation
from .quadrature import Grid, GridFunction


@dataclass(frozen=True)
class MSDParams:
    m: float
    delta: float
    k: float
    sigma: float
    gamma: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if not self.k > 0:
            raise ValueError(f"spring constant must be positive, got {self.k}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.delta >= 0:
            raise ValueError(f"damping must be non-negative, got {self.delta}")
        kernel_rate(self.gamma)

    @property
    def rate(self) -> float:
        return self.gamma / (1.0 - self.gamma)

    @property
    def mass_coef(self) -> float:
        """``m / sigma^(2(1-gamma))``, the coefficient of the order-2gamma term."""
        return self.m / self.sigma ** (2.0 * (1.0 - self.gamma))

    @property
    def damping_coef(self) -> float:
        """``delta / sigma^(1-gamma)``."""
        return self.delta / self.sigma ** (1.0 - self.gamma)

    @property
    def solvability(self) -> float:
        """``m/(sigma^(2(1-g))(1-g)) + delta/sigma^(1-g) + k(1-g)``; must be nonzero."""
        g = self.gamma
        return self.mass_coef / (1.0 - g) + self.damping_coef + self.k * (1.0 - g)


@dataclass(frozen=True)
class VolterraProblem:
    """``y + int_0^t y(s) [A + B (t-s)] ds = F1``.

    With ``rate > 0`` the problem is stored in the weighted unknown
    ``z = y exp(-rate t)``: ``F1`` holds ``F1(t) exp(-rate t)`` and the solver
    returns ``z``. The discrete solution is the same, only scaled, and stays
    finite where ``y`` itself would overflow.
    """

    A: float
    B: float
    F1: GridFunction
    rate: float = 0.0


def printed_coefficients(params: MSDParams) -> tuple[float, float]:
    """Kernel coefficients ``(A, B)`` in the form they are usually quoted for this model.

    Kept for comparison only: they disagree in sign and denominator with the
    integration-by-parts chain (the solver uses :func:`kernel_coefficients`).
    """
    m, d, k, s, g = params.m, params.delta, params.k, params.sigma, params.gamma
    sg = s ** (1.0 - g)
    den = m + d * sg + k * (1.0 - g) * sg**2
    A = g * (2.0 * m + d * (1.0 - g) * sg) / ((1.0 - g) ** 2 * den)
    B = -m * g**2 / ((1.0 - g) ** 3 * den)
    return A, B


def kernel_coefficients(params: MSDParams) -> tuple[float, float]:
    """``(A, B)`` of the Volterra kernel ``A + B (t - s)``."""
    g, r = params.gamma, params.rate
    M, D, E = params.mass_coef, params.damping_coef, params.solvability
    A = -r * (2.0 * M / (1.0 - g) + D) / E
    B = r * r * M / ((1.0 - g) * E)
    return A, B


def msd_reduce(params: MSDParams, F: GridFunction, x0: float | None = None) -> VolterraProblem:
    """Volterra data for the mass-spring-damper equation, in the weighted form ``rate = gamma/(1-gamma)``.

    ``x0`` is ``x(0)``. The equation itself forces ``k x(0) = F(0)`` (both CF
    terms vanish at ``t = 0``), so ``x0`` defaults to ``F(0) / k``; any other
    value yields the solution of the Volterra equation, which then does not
    satisfy the original equation at ``t = 0``.
    """
    E = params.solvability
    if not abs(E) > 1e-300 or not math.isfinite(E):
        raise SolvabilityViolation(f"solvability constant vanishes: {E!r}")
    if F.grid.t0 != 0.0:
        raise ValueError("the forcing must be sampled from t = 0")
    if x0 is None:
        x0 = F.values[0] / params.k
    g, r = params.gamma, params.rate
    M, D = params.mass_coef, params.damping_coef
    A, B = kernel_coefficients(params)
    t = F.grid.nodes
    # boundary term of the integration by parts, with kernel P - Q t
    P = M / (1.0 - g) + D
    Q = r * M / (1.0 - g)
    weighted = ((1.0 - g) * F.values + x0 * (P - Q * t) * np.exp(-r * t)) / E
    return VolterraProblem(A, B, GridFunction(F.grid, weighted, name="F1"), rate=r)


def volterra_solve(problem: VolterraProblem, grid: Grid | None = None) -> GridFunction:
    """Trapezoid product-integration march for the second-kind Volterra equation.

    At node ``k``: ``y_k (1 + h A / 2) = F1_k - h sum_{j<k} w_j y_j [A + B (t_k - t_j)]``
    with ``w_0 = 1/2`` and ``w_j = 1`` otherwise. The linear kernel lets the
    history sums be carried forward, so the march is O(n).
    """
    F1 = problem.F1
    if grid is not None and grid != F1.grid:
        raise ValueError("grid does not match the grid of F1")
    h = F1.grid.h
    A, B = problem.A, problem.B
    lead = 1.0 + 0.5 * h * A
    if abs(lead) < 1e-12:
        raise NearSingularStep(f"1 + h A / 2 = {lead:.3e}; reduce the step")
    decay = math.exp(-problem.rate * h)
    rhs = F1.values
    n = F1.grid.n
    y = np.empty(n)
    y[0] = rhs[0]
    # s0 = h sum w_j y_j e^{-rate (t_k - t_j)},  s1 = h sum w_j y_j (t_k - t_j) e^{-rate (t_k - t_j)}
    s0 = s1 = 0.0
    for k in range(1, n):
        w_prev = 0.5 if k == 1 else 1.0
        s1 = decay * (s1 + h * s0 + h * h * w_prev * y[k - 1])
        s0 = decay * (s0 + h * w_prev * y[k - 1])
        y[k] = (rhs[k] - A * s0 - B * s1) / lead
    return GridFunction(F1.grid, y, name="y")


def solve_msd(params: MSDParams, F: GridFunction, x0: float | None = None) -> GridFunction:
    """Displacement ``x(t)`` on the grid of ``F``.

    The march is second order in ``rate * h``; as gamma approaches 1 the kernel
    rate ``gamma / (1 - gamma)`` grows and the step has to shrink with it.
    """
    if params.rate * F.grid.h > 0.05:
        warnings.warn(
            f"step h={F.grid.h:.3g} is coarse for kernel rate {params.rate:.3g}; "
            "expect O((rate*h)^2) relative errors",
            RuntimeWarning,
            stacklevel=2,
        )
    x = volterra_solve(msd_reduce(params, F, x0))
    return x.with_values(x.values, name="x")


def msd_residual(params: MSDParams, x: GridFunction, F: GridFunction) -> GridFunction:
    """Left-hand side minus ``F`` with numerically evaluated CF derivatives."""
    lhs = params.mass_coef * cf_d_2gamma(x, params.gamma) + params.damping_coef * cf_d_gamma(x, params.gamma) + params.k * x
    res = lhs - F
    return res.with_values(res.values, name="residual")
