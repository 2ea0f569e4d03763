"""Left-point Riemann-Stieltjes (Young) integrals against sampled drivers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import RangeError, YoungConditionError
from .paths import SampledPath

__all__ = [
    "IntegrandPath",
    "check_young",
    "young_integrate",
    "dyadic_refinements",
    "integrate_one_form",
    "ito_residual",
]


@dataclass(frozen=True)
class IntegrandPath:
    """Linear maps ``Y_t: R^d -> R^m`` sampled on a grid, shape ``(N, m, d)``."""

    times: np.ndarray
    values: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None, None]
        elif values.ndim == 2:
            values = values[:, None, :]
        if values.ndim != 3 or values.shape[0] != len(times):
            raise RangeError(f"integrand shape {values.shape} does not match {len(times)} nodes")
        if not np.all(np.isfinite(values)):
            raise RangeError("integrand contains non-finite entries")
        if not np.all(np.diff(times) > 0):
            raise RangeError("integrand grid must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, matrix, driver: SampledPath) -> "IntegrandPath":
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(driver.times, np.broadcast_to(m, (len(driver), *m.shape)), alpha=1.0)

    @classmethod
    def from_path(cls, path: SampledPath, f: Callable[[np.ndarray], np.ndarray]) -> "IntegrandPath":
        """Integrand ``f(path_t)``; ``f`` maps ``(N, n)`` points to ``(N, m, d)`` matrices."""
        return cls(path.times, f(path.values), alpha=path.alpha)

    @property
    def out_dim(self) -> int:
        return self.values.shape[1]

    @property
    def in_dim(self) -> int:
        return self.values.shape[2]


def check_young(alpha_integrand: float, alpha_driver: float) -> None:
    if alpha_integrand + alpha_driver <= 1.0:
        raise YoungConditionError(alpha_integrand, alpha_driver)


def _common_refinement(Y: IntegrandPath, Z: SampledPath):
    if np.array_equal(Y.times, Z.times):
        return Z.times, Y.values, Z.values
    if not (np.isclose(Y.times[0], Z.times[0]) and np.isclose(Y.times[-1], Z.times[-1])):
        raise RangeError("integrand and driver grids cover different intervals")
    t = np.union1d(Y.times, Z.times)
    # left-constant extension of the integrand, consistent with left-point sums
    idx = np.clip(np.searchsorted(Y.times, t, side="right") - 1, 0, len(Y.times) - 1)
    z = np.column_stack([np.interp(t, Z.times, Z.values[:, j]) for j in range(Z.dim)])
    return t, Y.values[idx], z


def _left_sums(y, z):
    incr = np.einsum("imd,id->im", y[:-1], np.diff(z, axis=0))
    out = np.zeros((len(z), y.shape[1]))
    np.cumsum(incr, axis=0, out=out[1:])
    return out


def dyadic_refinements(Y: IntegrandPath, Z: SampledPath, levels: int = 3) -> np.ndarray:
    """Terminal integral values on grids coarsened by ``2**(levels-1), ..., 2, 1``.

    Requires a shared grid whose interval count is divisible by
    ``2**(levels-1)``.  Successive differences shrink like ``mesh**(2*alpha-1)``
    for Hölder data.
    """
    if not np.array_equal(Y.times, Z.times):
        raise RangeError("dyadic refinements need the integrand on the driver grid")
    N = len(Z) - 1
    out = []
    for lev in range(levels - 1, -1, -1):
        step = 2**lev
        if N % step:
            raise RangeError(f"{N} intervals not divisible by {step}")
        out.append(_left_sums(Y.values[::step], Z.values[::step])[-1])
    return np.array(out)


def young_integrate(Y: IntegrandPath, Z: SampledPath, *, return_refinements: bool = False):
    """Running integral ``I_t = sum Y(s_i) (Z(s_{i+1}) - Z(s_i))`` with ``I_0 = 0``.

    Mismatched grids are merged; the integrand is extended piecewise constant
    from the left and the driver linearly.  The result lives on the merged grid
    and carries the driver's exponent.
    """
    check_young(Y.alpha, Z.alpha)
    if Y.in_dim != Z.dim:
        raise RangeError(f"integrand expects a {Y.in_dim}-dim driver, got {Z.dim}")
    t, y, z = _common_refinement(Y, Z)
    result = SampledPath(t, _left_sums(y, z), alpha=Z.alpha, meta={"generator": "young_integral"})
    if return_refinements:
        return result, dyadic_refinements(Y, Z)
    return result


def integrate_one_form(beta: Callable[[np.ndarray], np.ndarray], x: SampledPath) -> SampledPath:
    """Integral of a 1-form along ``x``.

    ``beta`` maps an ``(N, n)`` array of points to ``(N, n)`` covectors (or
    ``(N, m, n)`` for a vector of forms).
    """
    b = np.asarray(beta(x.values), dtype=float)
    if b.ndim == 2:
        b = b[:, None, :]
    return young_integrate(IntegrandPath(x.times, b, alpha=x.alpha), x)


def ito_residual(F: Callable[[np.ndarray], np.ndarray],
                 DF: Callable[[np.ndarray], np.ndarray],
                 x: SampledPath) -> float:
    """``max_t |F(x_t) - F(x_0) - int_0^t DF(x_s) dx_s|`` on the path's own grid.

    ``F`` maps ``(N, n) -> (N, m)`` and ``DF`` maps ``(N, n) -> (N, m, n)``.
    """
    fx = np.asarray(F(x.values), dtype=float)
    if fx.ndim == 1:
        fx = fx[:, None]
    I = integrate_one_form(DF, x).values
    return float(np.max(np.linalg.norm(fx - fx[0] - I, axis=1)))
