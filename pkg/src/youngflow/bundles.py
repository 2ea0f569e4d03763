"""Frame transport on the unit sphere and connection forms on matrix-group bundles.

A frame at ``x`` in S^2 is a 3x2 matrix ``u`` with orthonormal columns
tangent at ``x``.  The discrete transport step projects the previous frame to
the new tangent plane and re-orthonormalizes it with the polar factor.  For
unit-sphere data this equals Levi-Civita transport along the chord geodesic
between consecutive nodes, so holonomies are exact for the geodesic polygon
through the nodes and frames stay orthonormal to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ManifoldError, RangeError
from .lie import proj_h, rot_z, so3_exp, so3_log, so2_exp, hat
from .manifolds import Sphere
from .paths import SampledPath

__all__ = [
    "FramePath",
    "ConnectionForm",
    "sphere_frame_connection",
    "homogeneous_connection",
    "trivial_connection",
    "frame_at",
    "horizontal_lift",
    "parallel_transport",
    "holonomy_angle",
    "horizontality_residual",
    "covariant_derivative",
    "develop",
    "antidevelop",
    "group_horizontal_lift",
]

FRAME_TOL = 1e-10
_SPHERE = Sphere(1.0)


@dataclass(frozen=True)
class FramePath:
    """Base points ``x`` (N, 3) on S^2 with frames ``u`` (N, 3, 2)."""

    times: np.ndarray
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        if self.x.shape != (len(self.times), 3) or self.u.shape != (len(self.times), 3, 2):
            raise RangeError("frame path arrays do not match the grid")

    def __len__(self):
        return len(self.times)

    def orthonormality_error(self) -> float:
        utu = np.swapaxes(self.u, 1, 2) @ self.u
        return float(np.max(np.abs(utu - np.eye(2))))

    def tangency_error(self) -> float:
        return float(np.max(np.abs(np.einsum("na,nak->nk", self.x, self.u))))

    def as_rotations(self) -> np.ndarray:
        """Rotation matrices ``[u1, u2, x]``; the frame bundle viewed as SO(3)."""
        return np.concatenate([self.u, self.x[:, :, None]], axis=2)


def _check_frame(x, u, index=0):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (3,) or u.shape != (3, 2):
        raise RangeError(f"frame must be 3x2 at a point of R^3, got {u.shape} at {x.shape}")
    if abs(np.linalg.norm(x) - 1.0) > FRAME_TOL:
        raise ManifoldError("base point is not on the unit sphere", index)
    if np.max(np.abs(u.T @ u - np.eye(2))) > FRAME_TOL:
        raise ManifoldError("frame is not orthonormal", index)
    if np.max(np.abs(x @ u)) > FRAME_TOL:
        raise ManifoldError("frame is not tangent at its base point", index)
    return x, u


def frame_at(x, e1=None) -> np.ndarray:
    """Positively oriented frame at ``x`` whose first vector is ``e1`` projected to ``T_x``.

    Without ``e1`` the projection of whichever coordinate axis is least
    aligned with ``x`` is used.
    """
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    if e1 is None:
        e1 = np.eye(3)[int(np.argmin(np.abs(x)))]
    v = np.asarray(e1, dtype=float)
    v = v - (v @ x) * x
    nv = np.linalg.norm(v)
    if nv < 1e-12:
        raise ManifoldError("first frame vector is normal to the sphere")
    v = v / nv
    return np.column_stack([v, np.cross(x, v)])


def _polar(M, index):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[-1] < 1e-12:
        raise ManifoldError("frame degenerated under projection", index)
    return U @ Vt


@dataclass(frozen=True)
class ConnectionForm:
    """A connection 1-form on a matrix-group bundle with structure group H.

    ``omega(p, v)`` evaluates on a point ``p`` and tangent ``v`` at ``p``;
    ``vertical(p, A)`` is the fundamental field of ``A`` in the algebra of H;
    ``act(p, h)`` is the right action.  ``sample`` draws a random point,
    tangent, algebra element and group element for probing.
    """

    name: str
    omega: Callable
    vertical: Callable
    act: Callable
    ad_inv: Callable
    sample: Callable

    def calibration_error(self, probes: int = 8, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        err = 0.0
        for _ in range(probes):
            p, _, A, _ = self.sample(rng)
            err = max(err, float(np.max(np.abs(self.omega(p, self.vertical(p, A)) - A))))
        return err

    def equivariance_error(self, probes: int = 8, seed: int = 0) -> float:
        """``omega(p h, v h) = Ad(h^{-1}) omega(p, v)`` on random probes."""
        rng = np.random.default_rng(seed)
        err = 0.0
        for _ in range(probes):
            p, v, _, h = self.sample(rng)
            lhs = self.omega(self.act(p, h), self.act(v, h))
            rhs = self.ad_inv(h, self.omega(p, v))
            err = max(err, float(np.max(np.abs(lhs - rhs))))
        return err


def _ad_inv(h, X):
    return np.linalg.inv(h) @ X @ h


def _random_rotation(rng):
    return so3_exp(rng.standard_normal(3))


def sphere_frame_connection() -> ConnectionForm:
    """Levi-Civita connection on the orthonormal frame bundle of S^2.

    A point is a frame ``u`` (3x2); ``omega(u, du) = u^T du`` restricted to its
    skew part, the rotation rate of the frame inside the tangent plane.
    """
    def omega(u, du):
        w = u.T @ du
        return 0.5 * (w - w.T)

    def sample(rng):
        g = _random_rotation(rng)
        u = g[:, :2]
        # tangent to the bundle: move the base and spin the frame
        xi = hat(rng.standard_normal(3))
        du = xi @ u
        A = np.array([[0.0, -1.0], [1.0, 0.0]]) * rng.standard_normal()
        return u, du, A, so2_exp(rng.uniform(-np.pi, np.pi))

    return ConnectionForm("sphere_frame", omega, lambda u, A: u @ A, lambda u, h: u @ h, _ad_inv, sample)


def homogeneous_connection() -> ConnectionForm:
    """Canonical connection on SO(3) -> S^2: the h-component of ``g^{-1} dg``."""
    def omega(g, dg):
        return proj_h(g.T @ dg)

    def sample(rng):
        g = _random_rotation(rng)
        dg = g @ hat(rng.standard_normal(3))
        A = hat(np.array([0.0, 0.0, rng.standard_normal()]))
        return g, dg, A, rot_z(rng.uniform(-np.pi, np.pi))

    return ConnectionForm("homogeneous_so3", omega, lambda g, A: g @ A, lambda g, h: g @ h, _ad_inv, sample)


def trivial_connection() -> ConnectionForm:
    """Flat connection on G x H: ``omega((g, y), (dg, dy)) = y^{-1} dy``.

    Points and tangents are pairs ``(G-matrix, H-matrix)``; H acts on the
    second factor.
    """
    def omega(p, v):
        return np.linalg.inv(p[1]) @ v[1]

    def sample(rng):
        g = _random_rotation(rng)
        y = so2_exp(rng.uniform(-np.pi, np.pi))
        J = np.array([[0.0, -1.0], [1.0, 0.0]])
        v = (g @ hat(rng.standard_normal(3)), y @ J * rng.standard_normal())
        return (g, y), v, J * rng.standard_normal(), so2_exp(rng.uniform(-np.pi, np.pi))

    return ConnectionForm(
        "trivial", omega,
        lambda p, A: (np.zeros_like(p[0]), p[1] @ A),
        lambda p, h: (p[0], p[1] @ h),
        _ad_inv, sample,
    )


def _require_sphere_connection(conn):
    if conn is not None and conn.name != "sphere_frame":
        raise RangeError(f"frame transport needs the sphere frame connection, got {conn.name!r}")


def horizontal_lift(conn: Optional[ConnectionForm], x: SampledPath, u0) -> FramePath:
    """Transport the frame ``u0`` along the sphere path ``x``."""
    _require_sphere_connection(conn)
    if x.dim != 3:
        raise RangeError(f"sphere paths live in R^3, got dimension {x.dim}")
    pts = x.values
    off = np.abs(np.linalg.norm(pts, axis=1) - 1.0)
    if np.max(off) > FRAME_TOL:
        raise ManifoldError("path leaves the unit sphere", int(np.argmax(off > FRAME_TOL)))
    _, u = _check_frame(pts[0], u0)
    frames = np.empty((len(pts), 3, 2))
    frames[0] = u
    for i in range(1, len(pts)):
        p = pts[i]
        M = u - np.outer(p, p @ u)
        u = _polar(M, i)
        frames[i] = u
    return FramePath(x.times, pts.copy(), frames)


def holonomy_angle(lift: FramePath) -> float:
    """Rotation angle taking the initial frame to the final one, in ``(-pi, pi]``.

    Meaningful for closed loops, where both frames span the same plane.
    """
    C = lift.u[0].T @ lift.u[-1]
    return float(np.arctan2(C[1, 0], C[0, 0]))


def parallel_transport(conn: Optional[ConnectionForm], x: SampledPath, v, u0=None) -> np.ndarray:
    """Transport the tangent vector ``v`` at ``x_0`` to ``x_T``."""
    v = np.asarray(v, dtype=float)
    p0 = x.values[0]
    if v.shape != (3,):
        raise RangeError(f"tangent vector must be a 3-vector, got shape {v.shape}")
    if abs(v @ p0) > FRAME_TOL * (1.0 + np.linalg.norm(v)):
        raise ManifoldError("vector is not tangent at the starting point", 0)
    lift = horizontal_lift(conn, x, frame_at(p0) if u0 is None else u0)
    return lift.u[-1] @ (lift.u[0].T @ v)


def horizontality_residual(lift: FramePath) -> float:
    """``|sum_i omega(u_i, u_{i+1} - u_i)|``: the discrete integral of the connection form."""
    du = np.diff(lift.u, axis=0)
    w = np.einsum("nak,nal->nkl", lift.u[:-1], du)
    return float(np.max(np.abs(np.sum(0.5 * (w - np.swapaxes(w, 1, 2)), axis=0))))


def covariant_derivative(conn: Optional[ConnectionForm], Y: Union[Callable, np.ndarray], x: SampledPath,
                         u0=None, rate: bool = True) -> SampledPath:
    """``u_t d(u_t^{-1} Y_t)`` on the grid.

    ``Y`` is a tangent field (callable on ``(N, 3)`` points) or its values
    along the path.  With ``rate`` the increments are divided by the time
    step, giving a left-point difference quotient on the first ``N - 1``
    nodes; otherwise raw increments are returned.
    """
    vals = np.asarray(Y(x.values) if callable(Y) else Y, dtype=float)
    if vals.shape != x.values.shape:
        raise RangeError(f"tangent field values have shape {vals.shape}, expected {x.values.shape}")
    lift = horizontal_lift(conn, x, frame_at(x.values[0]) if u0 is None else u0)
    c = np.einsum("nak,na->nk", lift.u, vals)
    out = np.einsum("nak,nk->na", lift.u[:-1], np.diff(c, axis=0))
    if rate:
        out = out / np.diff(x.times)[:, None]
    return SampledPath(x.times[:-1], out, alpha=1.0, meta={"generator": "covariant_derivative"})


def develop(conn: Optional[ConnectionForm], w: SampledPath, u0, p0=None) -> SampledPath:
    """Roll the plane path ``w`` onto the unit sphere without slipping.

    Each step moves the base by ``project(x_i + u_i dw_i)`` and transports
    the frame to the new point.  Only increments of ``w`` enter.
    """
    _require_sphere_connection(conn)
    if w.dim != 2:
        raise RangeError(f"development needs a plane path, got dimension {w.dim}")
    if w.alpha <= 0.5:
        raise RangeError(f"driver exponent {w.alpha} is outside the Young regime (1/2, 1]")
    u = np.asarray(u0, dtype=float)
    x = np.cross(u[:, 0], u[:, 1]) if p0 is None else np.asarray(p0, dtype=float)
    x, u = _check_frame(x, u)
    pts = np.empty((len(w), 3))
    pts[0] = x
    for i, dw in enumerate(w.increments()):
        x = _SPHERE.project(x + u @ dw)
        u = _polar(u - np.outer(x, x @ u), i + 1)
        pts[i + 1] = x
    return SampledPath(w.times, pts, alpha=w.alpha, meta={"generator": "develop"})


def antidevelop(conn: Optional[ConnectionForm], x: SampledPath, u0) -> SampledPath:
    """Plane path with increments ``u_i^T v_i``, ``v_i`` the tangent step at ``x_i``.

    ``v_i = x_{i+1} / (x_i . x_{i+1}) - x_i`` is the tangent vector that the
    radial projection maps to ``x_{i+1}``; it agrees with the chord
    ``x_{i+1} - x_i`` to second order and makes this map the exact inverse of
    ``develop`` on the grid.
    """
    lift = horizontal_lift(conn, x, u0)
    pts = lift.x
    dots = np.einsum("na,na->n", pts[:-1], pts[1:])
    if np.any(dots <= 1e-12):
        raise ManifoldError("consecutive nodes are a quarter circle or more apart",
                            int(np.argmax(dots <= 1e-12)) + 1)
    v = pts[1:] / dots[:, None] - pts[:-1]
    dy = np.einsum("nak,na->nk", lift.u[:-1], v)
    y = np.zeros((len(pts), 2))
    np.cumsum(dy, axis=0, out=y[1:])
    return SampledPath(x.times, y, alpha=x.alpha, meta={"generator": "antidevelop"})


def group_horizontal_lift(section: np.ndarray, proj: Callable = proj_h,
                          exp: Callable = so3_exp, log: Callable = so3_log) -> np.ndarray:
    """Horizontal lift ``u_t = s_t a_t`` of the base path under the section ``s``.

    ``a`` solves ``da = -proj(s^{-1} ds) a`` in H, stepped as
    ``a_{i+1} = exp(-proj(log(s_i^{-1} s_{i+1}))) a_i``; ``proj`` projects
    onto the algebra of H.  Returns the lift ``(N, 3, 3)`` with ``u_0 = s_0``.
    """
    s = np.asarray(section, dtype=float)
    rel = np.swapaxes(s[:-1], 1, 2) @ s[1:]
    steps = exp(-proj(hat(log(rel))))
    a = np.empty_like(s)
    a[0] = np.eye(3)
    for i in range(len(steps)):
        a[i + 1] = steps[i] @ a[i]
    return s @ a
