"""Euler schemes for ``dx = X(x) dZ``: trajectories, flows, Jacobians, inverse flows.

Vector fields act on batches: ``X(x)`` maps points of shape ``(..., n)`` to
matrices of shape ``(..., n, d)`` whose columns are ``X_1(x), ..., X_d(x)``.
Every scheme here is the first-order left-point Euler step, which converges
for drivers with Hölder exponent above 1/2 at rate ``2*alpha - 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import RangeError
from .paths import SampledPath

logger = logging.getLogger(__name__)

__all__ = [
    "VectorFieldFamily",
    "Trajectory",
    "linear_field",
    "zero_field",
    "sum_fields",
    "solve_euler",
    "solve_flow",
    "variational_jacobian",
    "flow_at_own_time",
    "inverse_flow",
    "KunitaCheck",
    "ito_kunita_check",
    "BLOWUP_GUARD",
]

BLOWUP_GUARD = 1e8
# rows of the quadratic sweeps are screened against the guard every few steps
_GUARD_EVERY = 8


@dataclass(frozen=True)
class VectorFieldFamily:
    """``d`` vector fields on ``R^n`` with an optional analytic derivative.

    ``fn(x)`` has shape ``(..., n, d)``.  ``jac(x)`` has shape
    ``(..., n, d, n)`` with ``jac[..., a, j, k] = d X_j^a / d x^k``; when it is
    omitted a central finite difference of step ``fd_step`` is used.
    """

    n: int
    d: int
    fn: Callable[[np.ndarray], np.ndarray]
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "field"
    fd_step: float = 1e-6

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return self.jac(x)
        h = self.fd_step * (1.0 + np.abs(x))
        cols = []
        for k in range(self.n):
            e = np.zeros(self.n)
            e[k] = 1.0
            hk = h[..., k, None, None]
            cols.append((self.fn(x + e * h[..., k:k + 1]) - self.fn(x - e * h[..., k:k + 1])) / (2 * hk))
        return np.stack(cols, axis=-1)

    def check_jacobian(self, probes, step: float = 1e-6) -> float:
        """Largest relative mismatch between ``jac`` and central differences of ``fn``."""
        probes = np.atleast_2d(np.asarray(probes, dtype=float))
        fd = VectorFieldFamily(self.n, self.d, self.fn, None, fd_step=step).jacobian(probes)
        an = self.jacobian(probes)
        scale = np.maximum(np.abs(fd).max(), 1.0)
        return float(np.abs(an - fd).max() / scale)

    def __neg__(self):
        jac = None if self.jac is None else (lambda x, j=self.jac: -j(x))
        return VectorFieldFamily(self.n, self.d, lambda x, f=self.fn: -f(x), jac, f"-{self.name}", self.fd_step)


def linear_field(A) -> VectorFieldFamily:
    """``X_j(x) = A_j x``.  A single ``(n, n)`` matrix gives a scalar-driven field."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 2:
        A = A[None]
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise RangeError(f"linear field needs square matrices, got shape {A.shape}")
    d, n, _ = A.shape
    At = np.transpose(A, (1, 0, 2)).copy()  # [a, j, k] = A_j[a, k]

    def fn(x):
        return np.einsum("jab,...b->...aj", A, x)

    def jac(x):
        return np.broadcast_to(At, x.shape[:-1] + At.shape)

    return VectorFieldFamily(n, d, fn, jac, name="linear")


def zero_field(n: int, d: int = 1) -> VectorFieldFamily:
    return VectorFieldFamily(
        n, d,
        lambda x: np.zeros(x.shape[:-1] + (n, d)),
        lambda x: np.zeros(x.shape[:-1] + (n, d, n)),
        name="zero",
    )


def sum_fields(X: VectorFieldFamily, Y: VectorFieldFamily) -> VectorFieldFamily:
    if (X.n, X.d) != (Y.n, Y.d):
        raise RangeError("fields must share state and driver dimensions")
    return VectorFieldFamily(
        X.n, X.d, lambda x: X(x) + Y(x), lambda x: X.jacobian(x) + Y.jacobian(x),
        name=f"{X.name}+{Y.name}",
    )


@dataclass
class Trajectory:
    """Euler solution on a grid, truncated at the first node that trips the guard.

    ``states`` has one row per node up to, not including, ``explosion_index``.
    """

    times: np.ndarray
    states: np.ndarray
    jacobians: Optional[np.ndarray] = None
    explosion_index: Optional[int] = None
    info: dict = field(default_factory=dict)

    @property
    def exploded(self) -> bool:
        return self.explosion_index is not None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def explosion_time(self) -> Optional[float]:
        return None if self.explosion_index is None else float(self.times[self.explosion_index])

    def as_path(self, alpha: float) -> SampledPath:
        m = len(self.states)
        return SampledPath(self.times[:m], self.states, alpha=alpha, meta={"generator": "yde"})


def _driver_increments(X: VectorFieldFamily, Z: SampledPath) -> np.ndarray:
    if Z.dim != X.d:
        raise RangeError(f"field expects a {X.d}-dim driver, got {Z.dim}")
    if Z.alpha <= 0.5:
        raise RangeError(f"driver exponent {Z.alpha} is outside the Young regime (1/2, 1]")
    return Z.increments()


def _tripped(x, guard):
    with np.errstate(invalid="ignore", over="ignore"):
        return ~np.all(np.isfinite(x), axis=-1) | (np.linalg.norm(x, axis=-1) > guard)


def _euler_batch(X, dz, x0s, guard=BLOWUP_GUARD, with_jac=False):
    """March every row of ``x0s`` over the increments ``dz``; frozen once exploded."""
    B, n = x0s.shape
    N = len(dz) + 1
    states = np.empty((N, B, n))
    states[0] = x0s
    jacs = None
    if with_jac:
        jacs = np.empty((N, B, n, n))
        jacs[0] = np.eye(n)
    blow = np.full(B, -1)
    alive = ~_tripped(x0s, guard)
    blow[~alive] = 0
    x = x0s.copy()
    J = np.broadcast_to(np.eye(n), (B, n, n)).copy()
    with np.errstate(invalid="ignore", over="ignore"):
        for i in range(N - 1):
            if with_jac:
                M = _contract_driver(X.jacobian(x), dz[i])
                J_new = J + M @ J
            x_new = x + X(x) @ dz[i]
            bad = alive & (_tripped(x_new, guard) | (with_jac and ~np.all(np.isfinite(J_new), axis=(-2, -1))))
            blow[bad] = i + 1
            alive &= ~bad
            x = np.where(alive[:, None], x_new, x)
            states[i + 1] = x
            if with_jac:
                J = np.where(alive[:, None, None], J_new, J)
                jacs[i + 1] = J
    return states, jacs, blow


def _trajectory(times, states, jacs, blow):
    stop = len(times) if blow < 0 else int(blow)
    return Trajectory(
        times=np.asarray(times),
        states=states[:stop].copy(),
        jacobians=None if jacs is None else jacs[:stop].copy(),
        explosion_index=None if blow < 0 else int(blow),
    )


def solve_euler(X: VectorFieldFamily, Z: SampledPath, x0, guard: float = BLOWUP_GUARD) -> Trajectory:
    """``x_{i+1} = x_i + X(x_i)(Z_{i+1} - Z_i)``.

    A node whose state is non-finite or exceeds ``guard`` in norm is recorded
    as the explosion index, and the trajectory stops just before it.
    """
    x0 = np.asarray(x0, dtype=float).reshape(1, X.n)
    states, _, blow = _euler_batch(X, _driver_increments(X, Z), x0, guard)
    return _trajectory(Z.times, states[:, 0], None, blow[0])


def solve_flow(X: VectorFieldFamily, Z: SampledPath, x0s: Sequence, guard: float = BLOWUP_GUARD) -> list:
    """Independent Euler solutions for several initial points on one grid."""
    x0s = np.asarray(x0s, dtype=float)
    if x0s.size == 0:
        return []
    x0s = x0s.reshape(-1, X.n)
    states, _, blow = _euler_batch(X, _driver_increments(X, Z), x0s, guard)
    return [_trajectory(Z.times, states[:, b], None, blow[b]) for b in range(len(x0s))]


def variational_jacobian(X: VectorFieldFamily, Z: SampledPath, x0, guard: float = BLOWUP_GUARD) -> Trajectory:
    """Trajectory plus ``J_{i+1} = J_i + (DX(x_i) J_i) dZ_i`` with ``J_0 = I``."""
    x0 = np.asarray(x0, dtype=float).reshape(1, X.n)
    states, jacs, blow = _euler_batch(X, _driver_increments(X, Z), x0, guard, with_jac=True)
    return _trajectory(Z.times, states[:, 0], jacs[:, 0], blow[0])


def flow_at_own_time(X: VectorFieldFamily, dz: np.ndarray, starts: np.ndarray, with_jac: bool = True,
                     guard: float = BLOWUP_GUARD):
    """Push ``starts[i]`` through the first ``i`` Euler steps, for every ``i``.

    Returns ``(points, jac, jac_next)``: ``points[i] = eta_{t_i}(starts[i])``,
    ``jac[i] = D eta_{t_i}(starts[i])`` and ``jac_next[i] = D eta_{t_{i+1}}(starts[i])``
    (``N - 1`` rows).  Rows whose march tripped the guard are NaN.  The work is
    quadratic in the node count but vectorised across start points.
    """
    starts = np.asarray(starts, dtype=float)
    N, n = starts.shape
    Y = starts.copy()
    J = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    points = np.empty((N, n))
    jac = np.empty((N, n, n)) if with_jac else None
    jac_next = np.empty((N - 1, n, n)) if with_jac else None
    with np.errstate(invalid="ignore", over="ignore"):
        for j in range(N):
            points[j] = Y[j]
            if with_jac:
                jac[j] = J[j]
            if j == N - 1:
                break
            y = Y[j:]
            if with_jac:
                Jv = J[j:]
                M = _contract_driver(X.jacobian(y), dz[j])
                Jv += M @ Jv
                jac_next[j] = J[j]
            y += X(y) @ dz[j]
            if j % _GUARD_EVERY == 0 or j == N - 2:
                y[np.abs(y).max(axis=-1) > guard] = np.nan
    return points, jac, jac_next


def _contract_driver(DX, dz):
    """``sum_j DX[..., a, j, k] dz[j]`` for Jacobians of shape ``(..., n, d, n)``."""
    if len(dz) == 1:
        return DX[..., 0, :] * dz[0]
    return np.einsum("...ajk,j->...ak", DX, dz)


def _first_bad(arr):
    bad = ~np.all(np.isfinite(arr.reshape(len(arr), -1)), axis=1)
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def inverse_flow(X: VectorFieldFamily, Z: SampledPath, z0, *, tol: float = 1e-13,
                 max_iter: int = 200, cond_limit: float = 1e12,
                 newton_warmup: int = 4) -> Trajectory:
    """Solve ``dz = -(D eta_t(z))^{-1} X(eta_t(z)) dZ`` so that ``eta_t(z_t) = z0``.

    The flow ``eta`` and its Jacobian are those of the forward Euler scheme,
    evaluated at the current point ``z_t``.  Each step uses the Jacobian after
    the step's forward update, which makes the discrete path the exact inverse
    of the discrete forward flow for affine fields; the difference from a
    left-point Jacobian is a sum of squared increments and vanishes in the
    Young limit.  Since ``eta_t(z_t)`` depends on the whole past, the recursion
    is solved by Picard iteration over the full path.  The iteration starts
    from the flow of ``-X``, polished by a few pointwise Newton sweeps on
    ``eta_{t_i}(z_i) = z0``; the returned path is the Picard fixed point.
    ``info`` records the iteration count and the round-trip defect
    ``max_i |eta_{t_i}(z_i) - z0|``.
    """
    dz = _driver_increments(X, Z)
    z0 = np.asarray(z0, dtype=float).reshape(X.n)
    N = len(Z)
    states, _, blow = _euler_batch(-X, dz, z0[None, :])
    z = states[:, 0]
    if blow[0] >= 0:
        z[blow[0]:] = z[blow[0] - 1] if blow[0] > 0 else z0
    # warm start: pointwise Newton on eta_{t_i}(z_i) = z0
    for _ in range(newton_warmup):
        p, J, _ = flow_at_own_time(X, dz, z)
        with np.errstate(invalid="ignore", over="ignore"):
            corr = np.nan_to_num(np.linalg.solve(J, (p - z0)[:, :, None])[..., 0])
        z = z - corr
        if np.max(np.abs(corr)) <= 1e-10 * (1.0 + np.max(np.abs(z))):
            break
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p, _, Jn = flow_at_own_time(X, dz, z)
        with np.errstate(invalid="ignore", over="ignore"):
            bad_cond = np.linalg.cond(Jn) > cond_limit
            rhs = X(p[:-1]) @ dz[:, :, None]
            step = np.linalg.solve(np.where(bad_cond[:, None, None], np.eye(X.n), Jn), rhs)[..., 0]
        stop = _first_bad(np.where(bad_cond[:, None], np.nan, step))
        z_new = np.empty_like(z)
        z_new[0] = z0
        z_new[1:] = z0 - np.cumsum(np.nan_to_num(step), axis=0)
        if stop is not None:
            z_new[stop + 1:] = z_new[stop]
        delta = np.max(np.abs(z_new - z))
        z = z_new
        if delta <= tol * (1.0 + np.max(np.abs(z))):
            converged = True
            break
    if not converged:
        logger.warning("inverse flow Picard iteration stopped after %d sweeps", it)
    p, _, _ = flow_at_own_time(X, dz, z, with_jac=False)
    stop = _first_bad(np.column_stack([p[:-1], step]))
    explosion = None if stop is None else stop + 1
    m = N if explosion is None else explosion
    return Trajectory(
        times=Z.times, states=z[:m].copy(), explosion_index=explosion,
        info={"iterations": it, "converged": converged,
              "roundtrip": float(np.max(np.abs(p[:m] - z0))) if m else 0.0},
    )


@dataclass
class KunitaCheck:
    residual: float
    composed: np.ndarray
    kunita: np.ndarray
    iterations: int
    explosion_index: Optional[int] = None


def ito_kunita_check(X: VectorFieldFamily, Y: VectorFieldFamily, Z: SampledPath, x0, *,
                     tol: float = 1e-13, max_iter: int = 200, newton_iter: int = 30) -> KunitaCheck:
    """Compare ``eta_t(psi_t(x0))`` with an independent solution of the composed equation.

    ``eta`` is the flow of ``X`` and ``psi`` the flow of ``Y``, both driven by
    ``Z``.  The composed equation is
    ``d phi = X(phi) dZ + D eta_t(q) Y(q) dZ`` with ``q = eta_t^{-1}(phi)``,
    where ``q`` is found pointwise by Newton's method on the discrete forward
    flow.  Its Euler recursion is solved by Picard iteration started from the
    flow of ``X + Y``, so the composition never enters the computation.
    """
    if (X.n, X.d) != (Y.n, Y.d):
        raise RangeError("fields must share state and driver dimensions")
    dz = _driver_increments(X, Z)
    x0 = np.asarray(x0, dtype=float).reshape(X.n)
    N = len(Z)

    psi = solve_euler(Y, Z, x0)
    starts = psi.states
    if len(starts) < N:
        starts = np.vstack([starts, np.full((N - len(starts), X.n), np.nan)])
    composed, _, _ = flow_at_own_time(X, dz, starts, with_jac=False)

    guess = solve_euler(sum_fields(X, Y), Z, x0)
    phi = np.vstack([guess.states, np.repeat(guess.states[-1:], N - len(guess.states), axis=0)])
    q = phi.copy()
    it = 0
    for it in range(1, max_iter + 1):
        for _ in range(newton_iter):
            p, J, _ = flow_at_own_time(X, dz, q)
            with np.errstate(invalid="ignore", over="ignore"):
                corr = np.linalg.solve(J, (p - phi)[:, :, None])[..., 0]
            q = q - np.nan_to_num(corr)
            if np.max(np.abs(np.nan_to_num(corr))) <= tol * (1.0 + np.max(np.abs(q))):
                break
        p, J, _ = flow_at_own_time(X, dz, q)
        with np.errstate(invalid="ignore", over="ignore"):
            drift = X(phi[:-1]) + J[:-1] @ Y(q[:-1])
            incr = (drift @ dz[:, :, None])[..., 0]
        phi_new = np.empty_like(phi)
        phi_new[0] = x0
        phi_new[1:] = x0 + np.cumsum(np.nan_to_num(incr), axis=0)
        delta = np.max(np.abs(phi_new - phi))
        phi = phi_new
        if delta <= tol * (1.0 + np.max(np.abs(phi))):
            break
    else:
        logger.warning("Ito-Kunita Picard iteration did not converge in %d sweeps", max_iter)

    stop = _first_bad(np.column_stack([composed, np.vstack([incr, np.zeros((1, X.n))])]))
    m = N if stop is None else stop
    residual = float(np.max(np.linalg.norm(phi[:m] - composed[:m], axis=1))) if m else 0.0
    return KunitaCheck(residual, composed[:m], phi[:m], it, stop)
