"""Numerical Caputo-Fabrizio derivatives on a uniform grid.

All three operators convolve a finite-difference derivative of the input with
the exponential kernel ``exp(-r (t - s))``, ``r = order / (1 - order)``, and
integrate with trapezoid weights on the sampled integrand. The sums are
accumulated with a one-step recurrence, so a full evaluation is O(n) and
equals the explicit trapezoid sum at every node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridTooSmall, OrderOutOfRange
from .quadrature import GridFunction, derivative, second_derivative


@dataclass(frozen=True)
class CFOrder:
    """Order ``beta = 1 + alpha`` of the CF derivative, ``0 < alpha <= 1``.

    ``alpha = 1`` is representable, but has no exponential kernel, so
    :attr:`rate` and every kernel-based operation reject it.
    """

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise OrderOutOfRange(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def beta(self) -> float:
        return 1.0 + self.alpha

    @property
    def rate(self) -> float:
        """Kernel decay rate ``alpha / (1 - alpha)``."""
        return kernel_rate(self.alpha)


def kernel_rate(order: float) -> float:
    if not (0.0 < order < 1.0):
        raise OrderOutOfRange(f"kernel-based CF operators need an order in (0, 1), got {order}")
    return order / (1.0 - order)


def _as_alpha(order: CFOrder | float) -> float:
    return order.alpha if isinstance(order, CFOrder) else float(order)


def exp_kernel_moments(d: np.ndarray, rate: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid sums of ``d(s) exp(-rate (t_k - s))`` and ``d(s) (t_k - s) exp(-rate (t_k - s))``.

    Both integrals run from the first node to ``t_k``; returned for every k.
    """
    n = d.shape[0]
    decay = math.exp(-rate * h)
    zeroth = np.zeros(n)
    first = np.zeros(n)
    i0 = i1 = 0.0
    for k in range(1, n):
        # shift the previous window by one step, then add the new trapezoid panel
        i1 = decay * (i1 + h * i0) + 0.5 * h * h * decay * d[k - 1]
        i0 = decay * i0 + 0.5 * h * (decay * d[k - 1] + d[k])
        zeroth[k] = i0
        first[k] = i1
    return zeroth, first


def cf_d_gamma(x: GridFunction, gamma: float) -> GridFunction:
    """CF derivative of order ``gamma`` in (0, 1): ``1/(1-gamma) int_0^t x'(s) exp(-r(t-s)) ds``."""
    rate = kernel_rate(gamma)
    if x.grid.n < 3:
        raise GridTooSmall(f"cf_d_gamma needs n >= 3, got {x.grid.n}")
    zeroth, _ = exp_kernel_moments(derivative(x).values, rate, x.grid.h)
    return x.with_values(zeroth / (1.0 - gamma))


def cf_d_beta(u: GridFunction, order: CFOrder | float, a: float | None = None) -> GridFunction:
    """CF derivative of order ``1 + alpha`` built from ``u''``.

    The lower limit is the grid start; ``a`` is accepted only to make that
    explicit and must equal ``u.grid.t0``.
    """
    alpha = _as_alpha(order)
    rate = kernel_rate(alpha)
    if a is not None and not math.isclose(a, u.grid.t0, rel_tol=0.0, abs_tol=1e-12 * max(1.0, abs(a))):
        raise ValueError(f"lower limit a={a} must be the grid start {u.grid.t0}; re-grid instead")
    zeroth, _ = exp_kernel_moments(second_derivative(u).values, rate, u.grid.h)
    return u.with_values(zeroth / (1.0 - alpha))


def cf_d_2gamma(x: GridFunction, gamma: float) -> GridFunction:
    """Order-``2 gamma`` CF derivative obtained by composing the order-``gamma`` one with itself.

    Kernel: ``[1 - r (t - s)] exp(-r (t - s)) / (1 - gamma)^2`` against ``x'``.
    """
    rate = kernel_rate(gamma)
    if x.grid.n < 3:
        raise GridTooSmall(f"cf_d_2gamma needs n >= 3, got {x.grid.n}")
    zeroth, first = exp_kernel_moments(derivative(x).values, rate, x.grid.h)
    return x.with_values((zeroth - rate * first) / (1.0 - gamma) ** 2)
