"""Right-invariant flows on SO(3) split over the sphere S^2 = SO(3)/SO(2).

The projection is ``g -> g e3`` and H is the rotation group about ``e3``.
The flow ``g_t = exp(A (Z_t - Z_0))`` is written as ``g_t x = gH_t x h_t``
where ``t -> gH_t x`` is horizontal for the canonical connection (the
h-component of ``g^{-1} dg``) and ``h_t`` lies in H.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bundles import group_horizontal_lift
from .errors import InvariantError, RangeError
from .lie import H_angle, distance_to_H, is_skew, orthogonality_error, proj_h, rot_z, so2_exp, so3_exp, vee
from .linear import MatrixPath
from .paths import SampledPath

logger = logging.getLogger(__name__)

__all__ = [
    "HomogeneousDecomposition",
    "TrivialBundleDecomposition",
    "solve_right_invariant",
    "horizontal_factor",
    "decompose_homogeneous",
    "group_horizontality_residual",
    "trivial_bundle_decompose",
    "H_TOL",
]

H_TOL = 1e-6


def _skew3(A):
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3) or not is_skew(A, 1e-12) or not np.all(np.isfinite(A)):
        raise RangeError("A must be a finite skew-symmetric 3x3 matrix")
    return A


def _rotation(x, what="x"):
    x = np.eye(3) if x is None else np.asarray(x, dtype=float)
    if x.shape != (3, 3) or orthogonality_error(x) > 1e-10:
        raise RangeError(f"{what} must be a rotation matrix")
    return x


def _scalar(Z: SampledPath):
    if Z.dim != 1:
        raise RangeError(f"expected a scalar driver, got dimension {Z.dim}")
    return Z.values[:, 0] - Z.values[0, 0]


def solve_right_invariant(A, Z: SampledPath) -> MatrixPath:
    """``g_t = exp(A (Z_t - Z_0))``, solving ``dg = A g dZ`` with ``g_0 = I``."""
    A = _skew3(A)
    return MatrixPath(Z.times, so3_exp(_scalar(Z)[:, None] * vee(A)))


def horizontal_factor(A, Z: SampledPath, x=None) -> MatrixPath:
    """``gH`` with ``gH_0 = I`` and ``gH_t x`` the horizontal lift of ``t -> g_t x e3``.

    The lift is built from the section ``g_t x`` by an H-valued gauge
    correction (see ``group_horizontal_lift``).
    """
    x = _rotation(x)
    g = solve_right_invariant(A, Z).mats
    lift = group_horizontal_lift(g @ x)
    return MatrixPath(Z.times, lift @ x.T)


def group_horizontality_residual(lift: np.ndarray) -> float:
    """``max_t |sum_{i<t} proj_h(u_i^{-1} (u_{i+1} - u_i))|`` for a curve in SO(3)."""
    u = np.asarray(lift, dtype=float)
    w = proj_h(np.swapaxes(u[:-1], 1, 2) @ np.diff(u, axis=0))[:, 1, 0]
    return float(np.max(np.abs(np.cumsum(w)), initial=0.0))


@dataclass
class HomogeneousDecomposition:
    times: np.ndarray
    g: np.ndarray
    gH: np.ndarray
    h: np.ndarray
    x: np.ndarray
    residuals: dict = field(default_factory=dict)

    @property
    def h_angle(self) -> np.ndarray:
        return H_angle(self.h)


def decompose_homogeneous(A, Z: SampledPath, x=None, h_tol: float = H_TOL) -> HomogeneousDecomposition:
    """``g_t x = gH_t x h_t`` with ``h_t = x^{-1} gH_t^{-1} g_t x`` in H.

    Raises ``InvariantError`` if ``h_t`` is further than ``h_tol`` from H.
    The reported ``h`` is projected onto H; the distance before projection
    is kept in ``residuals``.
    """
    x = _rotation(x)
    g = solve_right_invariant(A, Z).mats
    gH = horizontal_factor(A, Z, x).mats
    h_raw = x.T @ np.swapaxes(gH, 1, 2) @ g @ x
    dist = distance_to_H(h_raw)
    worst = float(np.max(dist))
    if worst > h_tol:
        i = int(np.argmax(dist))
        raise InvariantError(f"fibre factor left H by {worst:.3g} at node {i}")
    h = rot_z(H_angle(h_raw))
    recon = float(np.max(np.abs(gH @ x @ h - g @ x)))
    residuals = {
        "reconstruction": recon,
        "dist_H_max": worst,
        "horizontality": group_horizontality_residual(gH @ x),
    }
    logger.debug("homogeneous decomposition residuals %s", residuals)
    return HomogeneousDecomposition(Z.times, g, gH, h, x, residuals)


@dataclass
class TrivialBundleDecomposition:
    times: np.ndarray
    eta_G: np.ndarray
    h: np.ndarray
    flow_G: np.ndarray
    flow_H: np.ndarray
    reconstruction: float


def trivial_bundle_decompose(A, B, Z: SampledPath, x0=None) -> TrivialBundleDecomposition:
    """Split the flow of ``(A, B)`` on SO(3) x SO(2) from ``x0 = (x, y)``.

    The horizontal part is ``eta_t = (exp(A dZ_t), I)`` and the fibre part is
    ``h_t = y^{-1} exp(B dZ_t) y`` with ``dZ_t = Z_t - Z_0``.
    """
    A = _skew3(A)
    B = np.asarray(B, dtype=float)
    if B.shape != (2, 2) or np.max(np.abs(B + B.T)) > 1e-12:
        raise RangeError("B must be a skew-symmetric 2x2 matrix")
    if x0 is None:
        x, y = np.eye(3), np.eye(2)
    else:
        x, y = x0
    x = _rotation(x, "x")
    y = np.asarray(y, dtype=float)
    if y.shape != (2, 2) or orthogonality_error(y) > 1e-10:
        raise RangeError("y must be a 2x2 rotation")
    dz = _scalar(Z)
    eta = so3_exp(dz[:, None] * vee(A))
    expB = so2_exp(dz * B[1, 0])
    h = y.T @ expB @ y
    # full flow from the generic matrix exponential, an independent route
    flow_G = scipy.linalg.expm(dz[:, None, None] * A) @ x
    flow_H = scipy.linalg.expm(dz[:, None, None] * B) @ y
    recon = max(float(np.max(np.abs(eta @ x - flow_G))), float(np.max(np.abs(y @ h - flow_H))))
    return TrivialBundleDecomposition(Z.times, eta, h, flow_G, flow_H, recon)
