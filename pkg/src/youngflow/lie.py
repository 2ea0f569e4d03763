"""Rotation groups: SO(3), its pole stabilizer SO(2), and their algebras.

Algebra elements are 3x3 skew matrices, identified with vectors in R^3 by
``hat``/``vee``.  The inner product on so(3) is ``<X, Y> = -tr(XY)/2``, under
which ``hat`` is an isometry.  H is the subgroup fixing the north pole
``e3``: rotations about the z axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import RangeError

__all__ = [
    "hat",
    "vee",
    "so3_exp",
    "so3_log",
    "rot_z",
    "so2_exp",
    "proj_h",
    "proj_m",
    "inner",
    "is_skew",
    "distance_to_H",
    "project_to_H",
    "H_angle",
    "orthogonality_error",
    "MatrixLieGroup",
    "SO3",
    "SO2",
    "STABILIZER",
    "parse_generator",
]

E3 = np.array([0.0, 0.0, 1.0])


def hat(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != 3:
        raise RangeError(f"expected 3-vectors, got shape {w.shape}")
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def vee(X) -> np.ndarray:
    """Inverse of ``hat`` applied to the skew part of ``X``."""
    X = np.asarray(X, dtype=float)
    return 0.5 * np.stack([X[..., 2, 1] - X[..., 1, 2],
                           X[..., 0, 2] - X[..., 2, 0],
                           X[..., 1, 0] - X[..., 0, 1]], axis=-1)


def inner(X, Y) -> np.ndarray:
    return -0.5 * np.einsum("...ij,...ji->...", X, Y)


def is_skew(X, tol: float = 1e-12) -> bool:
    X = np.asarray(X, dtype=float)
    return X.shape[-2:] == (3, 3) and bool(np.max(np.abs(X + np.swapaxes(X, -1, -2))) <= tol)


def so3_exp(w) -> np.ndarray:
    """Rodrigues formula, vectorized over leading axes of ``w`` (vectors or skew matrices)."""
    w = np.asarray(w, dtype=float)
    if w.shape[-2:] == (3, 3):
        w = vee(w)
    theta = np.linalg.norm(w, axis=-1)[..., None, None]
    K = hat(w)
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + a * K + b * (K @ K)


def so3_log(R) -> np.ndarray:
    """Rotation vector of ``R`` with angle in ``[0, pi]``."""
    R = np.asarray(R, dtype=float)
    batch = R.shape[:-2]
    R = R.reshape(-1, 3, 3)
    cos = np.clip((np.trace(R, axis1=1, axis2=2) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos)
    v = vee(R)
    out = np.empty((len(R), 3))
    small = theta < 1e-6
    near_pi = theta > np.pi - 1e-6
    mid = ~(small | near_pi)
    out[small] = v[small] * (1.0 + theta[small, None] ** 2 / 6.0)
    out[mid] = v[mid] * (theta[mid] / np.sin(theta[mid]))[:, None]
    for i in np.flatnonzero(near_pi):
        S = 0.5 * (R[i] + np.eye(3))
        j = int(np.argmax(np.diag(S)))
        axis = S[:, j] / np.sqrt(S[j, j])
        if axis @ v[i] < 0:
            axis = -axis
        out[i] = theta[i] * axis
    return out.reshape(batch + (3,))


def rot_z(theta) -> np.ndarray:
    """Rotation by ``theta`` about the z axis, an element of H."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(theta.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def so2_exp(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def proj_h(X) -> np.ndarray:
    """Orthogonal projection of ``X`` in so(3) onto the algebra of H."""
    X = np.asarray(X, dtype=float)
    w3 = 0.5 * (X[..., 1, 0] - X[..., 0, 1])
    return hat(np.stack([np.zeros_like(w3), np.zeros_like(w3), w3], -1))


def proj_m(X) -> np.ndarray:
    """Projection onto the horizontal complement ``m = h^perp``."""
    X = np.asarray(X, dtype=float)
    w = vee(X)
    w[..., 2] = 0.0
    return hat(w)


def H_angle(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return np.arctan2(g[..., 1, 0] - g[..., 0, 1], g[..., 0, 0] + g[..., 1, 1])


def distance_to_H(g) -> np.ndarray:
    """``|g e3 - e3|`` plus the orthogonality defect of the upper-left 2x2 block."""
    g = np.asarray(g, dtype=float)
    pole = np.linalg.norm(g[..., :, 2] - E3, axis=-1)
    ul = g[..., :2, :2]
    defect = np.linalg.norm(np.swapaxes(ul, -1, -2) @ ul - np.eye(2), axis=(-2, -1))
    return pole + defect


def project_to_H(g) -> np.ndarray:
    return rot_z(H_angle(g))


def orthogonality_error(g) -> float:
    g = np.asarray(g, dtype=float)
    gtg = np.swapaxes(g, -1, -2) @ g
    return float(max(np.max(np.abs(gtg - np.eye(g.shape[-1]))),
                     np.max(np.abs(np.linalg.det(g) - 1.0))))


@dataclass(frozen=True)
class MatrixLieGroup:
    """A matrix group with exponential, logarithm and an algebra basis."""

    name: str
    size: int
    exp: Callable
    log: Callable
    basis: np.ndarray
    distance_to_subgroup: Callable = None

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.size)

    def contains(self, g, tol: float = 1e-10) -> bool:
        g = np.asarray(g, dtype=float)
        return g.shape[-2:] == (self.size, self.size) and orthogonality_error(g) <= tol


def _so2_log(g):
    g = np.asarray(g, dtype=float)
    return np.arctan2(g[..., 1, 0], g[..., 0, 0])


SO3 = MatrixLieGroup("SO(3)", 3, so3_exp, so3_log, hat(np.eye(3)), distance_to_H)
SO2 = MatrixLieGroup("SO(2)", 2, so2_exp, _so2_log, np.array([[[0.0, -1.0], [1.0, 0.0]]]))
STABILIZER = MatrixLieGroup("SO(2) fixing e3", 3, rot_z, H_angle, hat(np.array([[0.0, 0.0, 1.0]])),
                            distance_to_H)

_AXES = {"x": 0, "y": 1, "z": 2}


def parse_generator(text: str) -> np.ndarray:
    """Skew matrix from ``axis:x|y|z`` or ``skew:a,b,c`` (the rotation vector)."""
    kind, _, rest = text.partition(":")
    if kind == "axis" and rest in _AXES:
        w = np.zeros(3)
        w[_AXES[rest]] = 1.0
        return hat(w)
    if kind == "skew":
        try:
            w = np.array([float(v) for v in rest.split(",")])
        except ValueError as exc:
            raise RangeError(f"bad generator {text!r}") from exc
        if w.shape != (3,) or not np.all(np.isfinite(w)):
            raise RangeError(f"skew generator needs three finite numbers, got {text!r}")
        return hat(w)
    raise RangeError(f"generator must be axis:x|y|z or skew:a,b,c, got {text!r}")
