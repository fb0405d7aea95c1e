"""Uniform time grids, sampled functions and the O(h^2) primitives built on them.

Everything in the package represents functions by their samples on a
:class:`Grid`; integrals are composite trapezoid sums and derivatives are
second-order finite differences (one-sided at the two endpoints).
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooSmall


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n`` nodes on ``[t0, t1]``."""

    t0: float
    t1: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)):
            raise ValueError("grid endpoints must be finite")
        if not self.t1 > self.t0:
            raise ValueError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if int(self.n) != self.n or self.n < 2:
            raise GridTooSmall(f"a grid needs at least 2 nodes, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + np.arange(self.n) * self.h

    def sample(self, fn: Callable[[np.ndarray], np.ndarray], name: str = "") -> GridFunction:
        """Evaluate a vectorised callable at the nodes."""
        values = np.broadcast_to(np.asarray(fn(self.nodes), dtype=float), (self.n,))
        return GridFunction(self, values, name=name)

    def zeros(self, name: str = "") -> GridFunction:
        return GridFunction(self, np.zeros(self.n), name=name)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples of a function on a :class:`Grid`.

    ``values`` is stored as a read-only float array. Arithmetic with scalars
    and with other grid functions on the same grid is supported.
    """

    grid: Grid
    values: np.ndarray
    name: str = field(default="", compare=False)

    # numpy scalars on the left defer to the reflected operators below
    __array_ufunc__ = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values, name: str | None = None) -> GridFunction:
        return GridFunction(self.grid, values, name=self.name if name is None else name)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / self._other(other))

    def __neg__(self):
        return self.with_values(-self.values)


def cumulative_integral(f: GridFunction) -> GridFunction:
    """Composite trapezoid antiderivative ``F(t_k) = int_{t0}^{t_k} f``, with ``F(t0) = 0``."""
    v = f.values
    out = np.zeros_like(v)
    out[1:] = np.cumsum(0.5 * f.grid.h * (v[1:] + v[:-1]))
    return f.with_values(out)


def derivative(f: GridFunction) -> GridFunction:
    """First derivative: central differences inside, second-order one-sided stencils at the ends."""
    if f.grid.n < 3:
        raise GridTooSmall(f"derivative needs n >= 3, got {f.grid.n}")
    return f.with_values(np.gradient(f.values, f.grid.h, edge_order=2))


def second_derivative(f: GridFunction) -> GridFunction:
    """Second derivative with the three-point stencil and 4-point one-sided ends."""
    if f.grid.n < 4:
        raise GridTooSmall(f"second_derivative needs n >= 4, got {f.grid.n}")
    v = f.values
    h2 = f.grid.h**2
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h2
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h2
    return f.with_values(out)
