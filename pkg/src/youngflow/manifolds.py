"""Embedded manifolds and projected Euler schemes on them.

Everything runs in ambient coordinates.  A manifold supplies a nearest-point
projection ``project`` from a neighbourhood onto itself, and the orthogonal
projector onto its tangent spaces.  Points are ambient vectors; SO(3) is
embedded in R^9 by row-major flattening.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np

from .errors import ManifoldError, RangeError
from .paths import SampledPath, sample_function
from .yde import BLOWUP_GUARD, Trajectory, VectorFieldFamily, _driver_increments
from .lie import hat

logger = logging.getLogger(__name__)

__all__ = [
    "EmbeddedManifold",
    "Sphere",
    "SO3Manifold",
    "LevelSet",
    "manifold_from_config",
    "solve_yde_on_manifold",
    "path_as_yde_residual",
    "rotation_field",
    "latitude_circle",
    "great_circle",
]

ON_MANIFOLD_TOL = 1e-10
TANGENCY_TOL = 1e-8


class EmbeddedManifold:
    """Base class: subclasses provide ``project`` and ``tangent_projector``."""

    ambient_dim: int
    dim: int

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def tangent_projector(self, x) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def require_on(self, x, tol: float = ON_MANIFOLD_TOL, index: Optional[int] = None):
        d = self.distance(x)
        if d > tol:
            raise ManifoldError(f"point is {d:.3g} away from the manifold (tolerance {tol:g})", index)

    def dproject(self, x) -> np.ndarray:
        """Derivative of ``project`` at ``x`` by central differences."""
        x = np.asarray(x, dtype=float)
        h = 1e-6 * (1.0 + np.linalg.norm(x))
        J = np.empty((self.ambient_dim, self.ambient_dim))
        for j in range(self.ambient_dim):
            e = np.zeros(self.ambient_dim)
            e[j] = h
            J[:, j] = (self.project(x + e) - self.project(x - e)) / (2 * h)
        return J


class Sphere(EmbeddedManifold):
    """Round 2-sphere of a given radius in R^3."""

    ambient_dim = 3
    dim = 2

    def __init__(self, radius: float = 1.0):
        if not (np.isfinite(radius) and radius > 0):
            raise RangeError(f"radius must be positive, got {radius}")
        self.radius = float(radius)

    def __repr__(self):
        return f"Sphere(radius={self.radius})"

    def project(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        if np.any(r < 1e-12):
            raise ManifoldError("cannot project the centre of the sphere")
        return self.radius * x / r

    def tangent_projector(self, x):
        x = np.asarray(x, dtype=float)
        n = x / np.linalg.norm(x, axis=-1, keepdims=True)
        return np.eye(3) - n[..., :, None] * n[..., None, :]

    def dproject(self, x):
        x = np.asarray(x, dtype=float)
        return self.radius / np.linalg.norm(x) * self.tangent_projector(x)

    def normal(self, x):
        x = np.asarray(x, dtype=float)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)


class SO3Manifold(EmbeddedManifold):
    """Rotation matrices, flattened row-major into R^9; projection is the polar factor."""

    ambient_dim = 9
    dim = 3

    def __repr__(self):
        return "SO3Manifold()"

    def project(self, x):
        M = np.asarray(x, dtype=float).reshape(-1, 3, 3)
        U, s, Vt = np.linalg.svd(M)
        if np.any(s[:, -1] < 1e-12):
            raise ManifoldError("polar projection of a rank-deficient matrix")
        D = np.ones((len(M), 3))
        D[:, 2] = np.sign(np.linalg.det(U @ Vt))
        R = (U * D[:, None, :]) @ Vt
        return R.reshape(np.shape(x))

    def tangent_projector(self, x):
        R = np.asarray(x, dtype=float).reshape(3, 3)
        P = np.empty((9, 9))
        for j in range(9):
            V = np.zeros(9)
            V[j] = 1.0
            S = R.T @ V.reshape(3, 3)
            P[:, j] = (R @ (0.5 * (S - S.T))).ravel()
        return P


class LevelSet(EmbeddedManifold):
    """Regular level set ``{g(x) = 0}`` of a map ``g: R^N -> R^c``.

    ``grad(x)`` returns the ``(c, N)`` Jacobian.  Projection is the
    Gauss-Newton iteration for the nearest point,
    ``y <- x - J^T (J J^T)^{-1} (g(y) + J (x - y))`` with ``J = grad(y)``,
    whose fixed points are on the set with ``x - y`` normal to it.
    """

    def __init__(self, g: Callable, grad: Callable, ambient_dim: int, codim: int = 1,
                 tol: float = 1e-14, max_iter: int = 50):
        self.g = g
        self.grad = grad
        self.ambient_dim = int(ambient_dim)
        self.codim = int(codim)
        self.dim = self.ambient_dim - self.codim
        self.tol = tol
        self.max_iter = max_iter

    def __repr__(self):
        return f"LevelSet(ambient_dim={self.ambient_dim}, codim={self.codim})"

    def _jac(self, y):
        return np.atleast_2d(np.asarray(self.grad(y), dtype=float))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        y = x.copy()
        for _ in range(self.max_iter):
            J = self._jac(y)
            rhs = np.atleast_1d(self.g(y)) + J @ (x - y)
            try:
                y_new = x - J.T @ np.linalg.solve(J @ J.T, rhs)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(y_new)):
                break
            step = np.linalg.norm(y_new - y)
            y = y_new
            if step <= self.tol * (1.0 + np.linalg.norm(y)):
                return y
        raise ManifoldError("level-set projection did not converge")

    def tangent_projector(self, x):
        J = self._jac(np.asarray(x, dtype=float))
        return np.eye(self.ambient_dim) - J.T @ np.linalg.solve(J @ J.T, J)


def manifold_from_config(cfg: dict) -> EmbeddedManifold:
    name = cfg.get("manifold")
    if name == "sphere":
        return Sphere(float(cfg.get("radius", 1.0)))
    if name == "so3":
        return SO3Manifold()
    raise RangeError(f"unknown manifold {name!r} (expected 'sphere' or 'so3')")


def solve_yde_on_manifold(M: EmbeddedManifold, X: VectorFieldFamily, Z: SampledPath, x0,
                          guard: float = BLOWUP_GUARD) -> Trajectory:
    """Projected Euler ``x_{i+1} = project(x_i + X(x_i) dZ_i)``.

    ``x0`` must be on ``M`` and ``X`` tangent at every visited node.
    """
    if X.n != M.ambient_dim:
        raise RangeError(f"field acts on R^{X.n}, manifold lives in R^{M.ambient_dim}")
    dz = _driver_increments(X, Z)
    x = np.asarray(x0, dtype=float).reshape(M.ambient_dim)
    M.require_on(x)
    states = np.empty((len(Z), M.ambient_dim))
    states[0] = x
    blow = None
    for i, h in enumerate(dz):
        V = X(x)
        normal_part = V - M.tangent_projector(x) @ V
        if np.max(np.abs(normal_part)) > TANGENCY_TOL * (1.0 + np.max(np.abs(V))):
            raise ManifoldError("vector field is not tangent to the manifold", i)
        try:
            x = M.project(x + V @ h)
        except ManifoldError as exc:
            raise ManifoldError(str(exc), i + 1) from None
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > guard:
            blow = i + 1
            break
        states[i + 1] = x
    stop = len(Z) if blow is None else blow
    return Trajectory(Z.times, states[:stop], explosion_index=blow,
                      info={"scheme": "projected_euler", "manifold": repr(M)})


def path_as_yde_residual(M: EmbeddedManifold, y: SampledPath) -> float:
    """Drive ``dx = Dproject(x) dz`` with ``z = y`` from ``x0 = y0``; return ``max |x - y|``.

    Uses the projected Euler step, so a path on ``M`` is recovered up to the
    scheme error.
    """
    if y.dim != M.ambient_dim:
        raise RangeError(f"path has dimension {y.dim}, manifold ambient dimension {M.ambient_dim}")
    pts = y.values
    M.require_on(pts[0], index=0)
    x = pts[0].copy()
    err = 0.0
    for i, dy in enumerate(np.diff(pts, axis=0)):
        x = M.project(x + M.dproject(x) @ dy)
        err = max(err, float(np.linalg.norm(x - pts[i + 1])))
    return err


def rotation_field(axis, radius: float = 1.0) -> VectorFieldFamily:
    """Scalar-driven field ``x -> axis x x`` tangent to spheres about the origin."""
    K = hat(np.asarray(axis, dtype=float))

    def fn(x):
        return (x @ K.T)[..., None]

    def jac(x):
        return np.broadcast_to(K[:, None, :], x.shape[:-1] + (3, 1, 3)).copy()

    return VectorFieldFamily(3, 1, fn, jac, name="rotation")


def latitude_circle(theta: float, n: int, turns: float = 1.0, radius: float = 1.0) -> SampledPath:
    """Circle of colatitude ``theta`` traversed ``turns`` times over ``[0, 1]``."""
    def f(t):
        phi = 2 * np.pi * turns * t
        return radius * np.column_stack([np.sin(theta) * np.cos(phi),
                                         np.sin(theta) * np.sin(phi),
                                         np.full_like(t, np.cos(theta))])

    path = sample_function(f, n, T=1.0)
    # close the loop exactly
    vals = path.values.copy()
    if float(turns).is_integer():
        vals[-1] = vals[0]
    return SampledPath(path.times, vals, alpha=1.0, meta={"generator": "latitude", "params": {"theta": theta}})


def great_circle(n: int, p0=(1.0, 0.0, 0.0), v0=(0.0, 1.0, 0.0), length: float = 2 * np.pi,
                 T: float = 1.0) -> SampledPath:
    """Unit-sphere geodesic from ``p0`` with initial unit direction ``v0``, arclength ``length``."""
    p0 = np.asarray(p0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    p0 = p0 / np.linalg.norm(p0)
    v0 = v0 - (v0 @ p0) * p0
    v0 = v0 / np.linalg.norm(v0)

    def f(t):
        s = length * t / T
        return np.cos(s)[:, None] * p0 + np.sin(s)[:, None] * v0

    path = sample_function(f, n, T=T)
    vals = path.values.copy()
    if np.isclose(length % (2 * np.pi), 0.0):
        vals[-1] = vals[0]
    return SampledPath(path.times, vals, alpha=1.0, meta={"generator": "great_circle", "params": {"length": length}})
