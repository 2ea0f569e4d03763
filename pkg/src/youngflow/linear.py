"""Linear flows ``dx = A x dZ``: fundamental solutions and their splitting.

For a scalar driver the flow is ``F_t = exp(A (Z_t - Z_0))``.  Fixing a
horizontal dimension ``k`` splits every matrix into blocks

    A = [[A1, A2],     F = [[F1, F2],
         [A3, A4]]          [F3, F4]]

and ``F = eta @ psi`` with ``eta = [[g1, g2], [0, I]]`` (leaves the last
``n - k`` coordinates alone) and ``psi = [[I, 0], [g3, g4]]`` (leaves the
first ``k`` alone).  The factorization exists exactly while ``F4`` is
invertible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import FoliationError, RangeError
from .paths import SampledPath
from .yde import BLOWUP_GUARD

__all__ = [
    "MatrixPath",
    "LinearSystem",
    "BlockDecomposition",
    "ExplosionReport",
    "Foliation",
    "fundamental_solution",
    "decompose_blocks",
    "decompose_via_yde",
    "detect_explosion",
    "schur_foliation",
    "decompose_foliated",
    "DEFAULT_SINGULAR_THRESHOLD",
]

DEFAULT_SINGULAR_THRESHOLD = 1e-8


@dataclass(frozen=True)
class MatrixPath:
    """Square matrices sampled on a time grid, shape ``(N, n, n)``."""

    times: np.ndarray
    mats: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.mats, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[0] != len(self.times):
            raise RangeError(f"expected ({len(self.times)}, n, n) matrices, got {mats.shape}")
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "mats", mats)

    def __len__(self):
        return len(self.times)

    @property
    def n(self) -> int:
        return self.mats.shape[1]


@dataclass(frozen=True)
class LinearSystem:
    """A matrix together with a horizontal dimension ``k``."""

    A: np.ndarray
    k: int

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise RangeError(f"A must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise RangeError("A contains non-finite entries")
        _check_k(self.k, A.shape[0])
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def blocks(self):
        k = self.k
        A = self.A
        return A[:k, :k], A[:k, k:], A[k:, :k], A[k:, k:]


def _check_k(k, n):
    if not (isinstance(k, (int, np.integer)) and 1 <= k < n):
        raise RangeError(f"horizontal dimension k must satisfy 1 <= k < {n}, got {k}")


@dataclass
class BlockDecomposition:
    """Blocks of ``eta`` and ``psi`` at every node before the explosion.

    ``g1..g4`` have ``len(times)`` rows when nothing exploded, otherwise
    ``explosion_index`` rows (nodes from the explosion on are dropped).
    """

    times: np.ndarray
    k: int
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    g4: np.ndarray
    explosion_index: Optional[int] = None
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.g1.shape[1] + self.g4.shape[1]

    @property
    def exploded(self) -> bool:
        return self.explosion_index is not None

    @property
    def valid_times(self) -> np.ndarray:
        return self.times[: len(self.g1)]

    def eta(self) -> np.ndarray:
        m, k, n = len(self.g1), self.k, self.n
        out = np.zeros((m, n, n))
        out[:, :k, :k] = self.g1
        out[:, :k, k:] = self.g2
        out[:, k:, k:] = np.eye(n - k)
        return out

    def psi(self) -> np.ndarray:
        m, k, n = len(self.g1), self.k, self.n
        out = np.zeros((m, n, n))
        out[:, :k, :k] = np.eye(k)
        out[:, k:, :k] = self.g3
        out[:, k:, k:] = self.g4
        return out

    def compose(self) -> np.ndarray:
        return self.eta() @ self.psi()

    def flat(self) -> np.ndarray:
        """One row per valid node: ``t`` followed by g1, g2, g3, g4 row-major."""
        m = len(self.g1)
        parts = [self.valid_times[:, None]] + [g.reshape(m, -1) for g in (self.g1, self.g2, self.g3, self.g4)]
        return np.hstack(parts)


@dataclass(frozen=True)
class ExplosionReport:
    time: float
    index: int
    kind: str
    bracket: tuple


def _scalar_driver(Z: SampledPath) -> np.ndarray:
    if Z.dim != 1:
        raise RangeError(f"linear flows take a scalar driver, got dimension {Z.dim}")
    return Z.values[:, 0] - Z.values[0, 0]


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise RangeError(f"A must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise RangeError("A contains non-finite entries")
    return A


def fundamental_solution(A, Z: SampledPath) -> MatrixPath:
    """``F_t = exp(A (Z_t - Z_0))`` at every node (Padé scaling and squaring)."""
    A = _as_matrix(A)
    dz = _scalar_driver(Z)
    return MatrixPath(Z.times, scipy.linalg.expm(dz[:, None, None] * A))


def _singular_mask(F: np.ndarray, k: int, threshold: float):
    """Nodes where ``F4`` is numerically singular relative to ``|F|``.

    The scale is the spectral norm of the whole ``F``: a relative test on
    ``F4`` alone is vacuous when ``F4`` is 1x1.
    """
    F4 = F[:, k:, k:]
    smin = np.linalg.svd(F4, compute_uv=False)[:, -1]
    scale = np.linalg.norm(F, 2, axis=(1, 2))
    return smin < threshold * scale, smin / scale


def _first_explosion(F: np.ndarray, k: int, threshold: float):
    """Index of the first node where ``F4`` is singular or changed sign, and why."""
    singular, _ = _singular_mask(F, k, threshold)
    # A continuous path of matrices can only change determinant sign by
    # passing through a singular one, which coarse grids step over.
    sign = np.sign(np.linalg.det(F[:, k:, k:]))
    flipped = np.zeros(len(F), dtype=bool)
    flipped[1:] = sign[1:] != sign[:-1]
    hit = np.flatnonzero(singular | flipped)
    if hit.size == 0:
        return None, None
    i = int(hit[0])
    return i, ("singular" if singular[i] else "sign_change")


def _blocks_from(F: np.ndarray, k: int):
    F1, F2, F3, F4 = F[:, :k, :k], F[:, :k, k:], F[:, k:, :k], F[:, k:, k:]
    # g2 = F2 F4^{-1}, solved as F4^T g2^T = F2^T
    g2 = np.swapaxes(np.linalg.solve(np.swapaxes(F4, 1, 2), np.swapaxes(F2, 1, 2)), 1, 2)
    g1 = F1 - g2 @ F3
    return g1, g2, F3.copy(), F4.copy()


def decompose_blocks(F: MatrixPath, k: int, threshold: float = DEFAULT_SINGULAR_THRESHOLD) -> BlockDecomposition:
    """Split ``F_t = eta_t psi_t`` node by node up to the first explosion."""
    _check_k(k, F.n)
    if not 0 < threshold < 1:
        raise RangeError(f"threshold must lie in (0, 1), got {threshold}")
    idx, kind = _first_explosion(F.mats, k, threshold)
    stop = len(F) if idx is None else idx
    mats = F.mats[:stop]
    if stop:
        g1, g2, g3, g4 = _blocks_from(mats, k)
    else:
        l = F.n - k
        g1, g2, g3, g4 = np.zeros((0, k, k)), np.zeros((0, k, l)), np.zeros((0, l, k)), np.zeros((0, l, l))
    info = {"method": "blocks", "threshold": threshold}
    if kind is not None:
        info["explosion_kind"] = kind
    return BlockDecomposition(F.times, k, g1, g2, g3, g4, explosion_index=idx, info=info)


def decompose_via_yde(A, k: int, Z: SampledPath, guard: float = BLOWUP_GUARD) -> BlockDecomposition:
    """Integrate the coupled block equations by left-point Euler.

        dg1 = (A1 g1 - g2 A3 g1) dZ
        dg2 = (A1 g2 + A2 - g2 A4 - g2 A3 g2) dZ
        dg3 = (A3 g1 + A3 g2 g3 + A4 g3) dZ
        dg4 = (A3 g2 g4 + A4 g4) dZ

    starting from ``g1 = I, g2 = 0, g3 = 0, g4 = I``.  The run stops when any
    block exceeds ``guard`` in absolute value or turns non-finite.
    """
    sys_ = LinearSystem(A, k)
    if Z.alpha <= 0.5:
        raise RangeError(f"driver exponent {Z.alpha} must exceed 1/2")
    A1, A2, A3, A4 = sys_.blocks
    l = sys_.n - k
    dz = np.diff(_scalar_driver(Z))
    N = len(Z)
    g1 = np.empty((N, k, k))
    g2 = np.empty((N, k, l))
    g3 = np.empty((N, l, k))
    g4 = np.empty((N, l, l))
    a1, a2, a3, a4 = np.eye(k), np.zeros((k, l)), np.zeros((l, k)), np.eye(l)
    g1[0], g2[0], g3[0], g4[0] = a1, a2, a3, a4
    blow = None
    for i, h in enumerate(dz):
        A3g1 = A3 @ a1
        A3g2 = A3 @ a2
        n1 = a1 + (A1 @ a1 - a2 @ A3g1) * h
        n2 = a2 + (A1 @ a2 + A2 - a2 @ A4 - a2 @ A3g2) * h
        n3 = a3 + (A3g1 + A3g2 @ a3 + A4 @ a3) * h
        n4 = a4 + (A3g2 @ a4 + A4 @ a4) * h
        a1, a2, a3, a4 = n1, n2, n3, n4
        if any(not np.all(np.isfinite(b)) or np.max(np.abs(b), initial=0.0) > guard for b in (a1, a2, a3, a4)):
            blow = i + 1
            break
        g1[i + 1], g2[i + 1], g3[i + 1], g4[i + 1] = a1, a2, a3, a4
    stop = N if blow is None else blow
    return BlockDecomposition(Z.times, k, g1[:stop], g2[:stop], g3[:stop], g4[:stop],
                              explosion_index=blow, info={"method": "yde", "guard": guard})


def _bisect(fun, lo, hi, iters=80):
    """Root bracket of ``fun`` which is positive at ``lo`` and not at ``hi``."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if fun(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def detect_explosion(A, k: int, Z: SampledPath,
                     threshold: float = DEFAULT_SINGULAR_THRESHOLD) -> Optional[ExplosionReport]:
    """First time the splitting ceases to exist, or ``None`` on the whole grid.

    The bracketing grid interval is refined by bisection in the driver value,
    assuming ``Z`` linear between nodes.  A determinant sign change is refined
    to the root of ``det F4``, a threshold crossing to the crossing itself.
    """
    A = _as_matrix(A)
    _check_k(k, A.shape[0])
    if not 0 < threshold < 1:
        raise RangeError(f"threshold must lie in (0, 1), got {threshold}")
    F = fundamental_solution(A, Z)
    idx, kind = _first_explosion(F.mats, k, threshold)
    if idx is None:
        return None
    t = Z.times
    if idx == 0:
        return ExplosionReport(float(t[0]), 0, kind, (float(t[0]), float(t[0])))
    z = _scalar_driver(Z)
    z_lo, z_hi = z[idx - 1], z[idx]

    def expF(s):
        return scipy.linalg.expm(s * A)

    if kind == "sign_change":
        s0 = np.sign(np.linalg.det(expF(z_lo)[k:, k:]))

        def fun(s):
            return s0 * np.linalg.det(expF(s)[k:, k:])
    else:
        def fun(s):
            return _singular_mask(expF(s)[None], k, threshold)[1][0] - threshold

    s_lo, s_hi = _bisect(fun, z_lo, z_hi)
    s = 0.5 * (s_lo + s_hi)
    frac = (s - z_lo) / (z_hi - z_lo)
    time = t[idx - 1] + frac * (t[idx] - t[idx - 1])
    return ExplosionReport(float(time), idx, kind, (float(t[idx - 1]), float(t[idx])))


@dataclass(frozen=True)
class Foliation:
    """Orthogonal change of basis in which ``A`` is block upper triangular.

    ``A = P T P^T`` with ``T`` quasi upper triangular and ``T[k:, :k]``
    exactly zero.  ``real_count`` and ``pair_count`` count the 1x1 and 2x2
    diagonal blocks inside the leading ``k x k`` block (``k = a + 2 b``).
    """

    P: np.ndarray
    k: int
    T: np.ndarray
    real_count: int
    pair_count: int
    admissible: tuple

    @property
    def horizontal_basis(self) -> np.ndarray:
        return self.P[:, : self.k]

    @property
    def vertical_basis(self) -> np.ndarray:
        return self.P[:, self.k:]


def schur_foliation(A, k: Optional[int] = None) -> Foliation:
    """Pick ``k`` at a diagonal block boundary of the real Schur form of ``A``.

    Every admissible ``k`` gives a block-triangular ``T``; the flow of ``T``
    then has an invertible lower-right block for all time, so the splitting
    never explodes.  The smallest admissible ``k`` is used unless one is
    requested.
    """
    A = _as_matrix(A)
    n = A.shape[0]
    if n < 2:
        raise RangeError("need at least a 2x2 matrix")
    T, P = scipy.linalg.schur(A, output="real")
    # LAPACK writes exact zeros below the first subdiagonal; make it explicit.
    T = np.triu(T, -1)
    admissible = tuple(j for j in range(1, n) if T[j, j - 1] == 0.0)
    if not admissible:
        raise FoliationError(
            "no invariant splitting: the 2x2 matrix has a complex eigenvalue pair; "
            "a splitting is guaranteed only for n > 2"
        )
    if k is None:
        k = admissible[0]
    elif k not in admissible:
        raise FoliationError(f"k={k} cuts through a 2x2 Schur block; admissible: {list(admissible)}")
    pairs = sum(1 for j in range(1, k) if T[j, j - 1] != 0.0)
    return Foliation(P, int(k), T, real_count=k - 2 * pairs, pair_count=pairs, admissible=admissible)


def decompose_foliated(A, Z: SampledPath, foliation: Optional[Foliation] = None,
                       threshold: float = DEFAULT_SINGULAR_THRESHOLD):
    """Split the flow of ``A`` along the Schur foliation.

    Returns ``(decomposition, eta, psi)`` where the decomposition lives in
    ``P``-coordinates and ``eta``, ``psi`` are mapped back by conjugation,
    so ``eta @ psi = exp(A (Z_t - Z_0))`` in the original coordinates.
    """
    A = _as_matrix(A)
    fol = foliation if foliation is not None else schur_foliation(A)
    dec = decompose_blocks(fundamental_solution(fol.T, Z), fol.k, threshold)
    P = fol.P
    eta = P @ dec.eta() @ P.T
    psi = P @ dec.psi() @ P.T
    return dec, eta, psi
