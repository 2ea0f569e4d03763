"""Grid-sampled Hölder drivers: containers, generators and an exponent estimator."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import RangeError

logger = logging.getLogger(__name__)

__all__ = [
    "SampledPath",
    "HolderEstimate",
    "uniform_grid",
    "gen_fbm",
    "gen_weierstrass",
    "gen_smooth",
    "sample_function",
    "stack_paths",
    "estimate_holder",
    "FBM_ALPHA_MARGIN",
]

# fBm is a.s. Hölder for every exponent strictly below the Hurst index.
FBM_ALPHA_MARGIN = 0.01


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SampledPath:
    """Path ``Z: [0, T] -> R^d`` known on a strictly increasing grid.

    ``values`` always has shape ``(len(times), dim)``; a 1-D input is treated as
    a scalar path.  ``alpha`` is the declared Hölder exponent, used by the
    Young-regime checks downstream.  Arrays are frozen after construction.
    """

    times: np.ndarray
    values: np.ndarray
    alpha: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = _readonly(self.times)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        values = _readonly(values)
        if times.ndim != 1 or len(times) < 2:
            raise RangeError("a path needs a 1-D grid with at least two nodes")
        if values.ndim != 2 or values.shape[0] != len(times):
            raise RangeError(
                f"values shape {values.shape} does not match {len(times)} grid nodes"
            )
        if not np.all(np.diff(times) > 0):
            raise RangeError("grid times must be strictly increasing")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(times))):
            raise RangeError("path contains non-finite entries")
        if not 0.0 < self.alpha <= 1.0:
            raise RangeError(f"declared Hölder exponent {self.alpha} outside (0, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "alpha", float(self.alpha))

    def __len__(self):
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.times)))

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def subsample(self, step: int) -> "SampledPath":
        """Every ``step``-th node; the final node must be retained."""
        if step < 1 or (len(self) - 1) % step:
            raise RangeError(f"step {step} does not divide {len(self) - 1} intervals")
        return SampledPath(self.times[::step], self.values[::step], self.alpha, dict(self.meta))

    def window(self, start: int, stop: int) -> "SampledPath":
        """Nodes ``start..stop`` inclusive, on the original clock."""
        return SampledPath(
            self.times[start : stop + 1], self.values[start : stop + 1], self.alpha, dict(self.meta)
        )

    def with_alpha(self, alpha: float) -> "SampledPath":
        return SampledPath(self.times, self.values, alpha, dict(self.meta))

    def map(self, f: Callable[[np.ndarray], np.ndarray], alpha: Optional[float] = None) -> "SampledPath":
        """Apply a smooth map node-wise.  Smooth maps keep the declared exponent."""
        out = np.asarray(f(self.values), dtype=float)
        return SampledPath(self.times, out, self.alpha if alpha is None else alpha, dict(self.meta))


def uniform_grid(n: int, T: float) -> np.ndarray:
    """``n`` nodes on ``[0, T]``.

    Computed as ``T * (i / (n - 1))`` so that refining ``n - 1`` by an integer
    factor reproduces the coarse nodes bit for bit.
    """
    if n < 2:
        raise RangeError("need at least two grid nodes")
    if not (T > 0 and math.isfinite(T)):
        raise RangeError(f"horizon T={T} must be positive and finite")
    return T * (np.arange(n) / (n - 1))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _fgn_autocov(hurst, m):
    k = np.arange(m, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def _fgn_circulant(hurst, N, rng, dim):
    gamma = _fgn_autocov(hurst, N + 1)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    m = len(row)
    out = np.empty((N, dim))
    for j in range(dim):
        w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        out[:, j] = np.fft.fft(np.sqrt(lam / m) * w)[:N].real
    return out


def _fgn_cholesky(hurst, N, rng, dim):
    cov = scipy.linalg.toeplitz(_fgn_autocov(hurst, N))
    L = scipy.linalg.cholesky(cov, lower=True)
    return L @ rng.standard_normal((N, dim))


def gen_fbm(hurst: float, n: int, T: float = 1.0, seed: int = 0, dim: int = 1,
            method: str = "auto") -> SampledPath:
    """Fractional Brownian motion with Hurst index ``hurst`` on a uniform grid.

    Uses the Davies-Harte circulant embedding of fractional Gaussian noise and
    falls back to a Cholesky factorisation of the exact Toeplitz covariance if
    the embedding is not positive semidefinite.  ``meta["method"]`` records
    which one ran.  Components of a multi-dimensional path are independent.
    """
    if not 0.5 < hurst < 1.0:
        raise RangeError(f"hurst={hurst} outside the Young regime (1/2, 1)")
    if n < 2:
        raise RangeError("need at least two grid nodes")
    if method not in ("auto", "circulant", "cholesky"):
        raise RangeError(f"unknown fBm method {method!r}")
    N = n - 1
    rng = np.random.default_rng(seed)
    noise = None
    used = "cholesky"
    if method in ("auto", "circulant"):
        noise = _fgn_circulant(hurst, N, rng, dim)
        used = "circulant"
        if noise is None:
            if method == "circulant":
                raise RangeError("circulant embedding is not positive semidefinite")
            logger.warning("circulant embedding not PSD; falling back to Cholesky")
            rng = np.random.default_rng(seed)
            used = "cholesky"
    if noise is None:
        noise = _fgn_cholesky(hurst, N, rng, dim)
    values = np.zeros((n, dim))
    values[1:] = np.cumsum(noise, axis=0) * (T / N) ** hurst
    return SampledPath(
        uniform_grid(n, T),
        values,
        alpha=hurst - FBM_ALPHA_MARGIN,
        meta={"generator": "fbm", "params": {"hurst": hurst, "n": n, "T": T, "dim": dim},
              "seed": seed, "method": used},
    )


def weierstrass_exponent(a: float, b: float) -> float:
    """Hölder exponent ``log(1/a) / log(b)`` of the Weierstrass function."""
    return math.log(1.0 / a) / math.log(b)


def gen_weierstrass(a: float, b: float, n: int, T: float = 1.0,
                    terms: Optional[int] = None) -> SampledPath:
    """Samples of ``W(t) = sum_k a^k cos(b^k pi t)``.

    ``b`` may be any real number above one.  Exponents above one are clamped
    to 1 (the series is then Lipschitz); exponents at or below 1/2 fall outside
    the Young regime and are rejected.  By default the series is truncated once
    ``a^k`` drops below 1e-16, with at most 512 terms.
    """
    if not 0.0 < a < 1.0:
        raise RangeError(f"a={a} must lie in (0, 1)")
    if not b > 1.0:
        raise RangeError(f"b={b} must exceed 1")
    alpha = weierstrass_exponent(a, b)
    if alpha <= 0.5:
        raise RangeError(
            f"Weierstrass exponent log(1/a)/log(b) = {alpha:.4f} <= 1/2 is outside the Young regime"
        )
    if terms is None:
        terms = min(512, math.ceil(math.log(1e-16) / math.log(a)))
    t = uniform_grid(n, T)
    k = np.arange(terms)
    values = (a**k[None, :] * np.cos(np.pi * np.outer(t, b**k))).sum(axis=1)
    return SampledPath(
        t, values, alpha=min(alpha, 1.0),
        meta={"generator": "weierstrass",
              "params": {"a": a, "b": b, "n": n, "T": T, "terms": int(terms)},
              "seed": None, "raw_alpha": alpha},
    )


def gen_smooth(kind: str, n: int, T: float = 1.0, **params) -> SampledPath:
    """Exact samples of a smooth scalar driver (declared exponent 1).

    kinds: ``linear`` (slope, intercept), ``sine`` (amp, freq, phase) giving
    ``amp * sin(freq * t + phase)``, ``polynomial`` (coeffs, ascending order).
    """
    t = uniform_grid(n, T)
    if kind == "linear":
        values = params.get("slope", 1.0) * t + params.get("intercept", 0.0)
    elif kind == "sine":
        values = params.get("amp", 1.0) * np.sin(params.get("freq", 1.0) * t + params.get("phase", 0.0))
    elif kind == "polynomial":
        coeffs = params.get("coeffs")
        if coeffs is None:
            raise RangeError("polynomial driver needs coeffs")
        values = np.polynomial.polynomial.polyval(t, np.asarray(coeffs, dtype=float))
    else:
        raise RangeError(f"unknown smooth kind {kind!r}")
    return SampledPath(
        t, values, alpha=1.0,
        meta={"generator": f"smooth:{kind}", "params": {"n": n, "T": T, **params}, "seed": None},
    )


def sample_function(f: Callable[[np.ndarray], np.ndarray], n: int, T: float = 1.0,
                    alpha: float = 1.0) -> SampledPath:
    """Sample an arbitrary vectorised function of time on a uniform grid."""
    t = uniform_grid(n, T)
    return SampledPath(t, f(t), alpha=alpha, meta={"generator": "function", "seed": None})


def stack_paths(paths: Sequence[SampledPath]) -> SampledPath:
    """Concatenate components of paths sharing one grid into a single driver."""
    if not paths:
        raise RangeError("nothing to stack")
    t = paths[0].times
    for p in paths[1:]:
        if p.times.shape != t.shape or not np.array_equal(p.times, t):
            raise RangeError("stacked paths must share their grid")
    return SampledPath(
        t, np.hstack([p.values for p in paths]), alpha=min(p.alpha for p in paths),
        meta={"generator": "stack", "parts": [p.meta for p in paths]},
    )


# ---------------------------------------------------------------------------
# exponent estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderEstimate:
    exponent: float
    degenerate: bool
    scales: np.ndarray
    log_max: np.ndarray

    def __float__(self):
        return self.exponent


def estimate_holder(path: SampledPath, min_scale: int = 1, groups: int = 16) -> HolderEstimate:
    """Log-log regression of maximal increments against dyadic lags.

    At lag ``h`` the disjoint increments are dealt into sets of ``groups``
    increments spaced evenly across the whole horizon.  Each set contributes
    the log of its largest increment and the sets are averaged.  Because the
    number of competitors in each maximum does not depend on ``h``, the
    extreme-value growth that biases a plain global maximum cancels out of the
    slope.  The fitted slope is clamped to ``(0, 1]``.

    Assumes a (near) uniform grid; lags are counted in nodes.
    """
    n = len(path)
    if n < 2**6:
        raise RangeError(f"need at least 64 nodes, got {n}")
    if min_scale < 1:
        raise RangeError("min_scale must be a positive number of grid steps")
    N = n - 1
    groups = max(2, min(groups, N // 4))
    dt = path.T / N
    z = path.values
    lags, logs = [], []
    h = 1
    while h < min_scale:
        h *= 2
    degenerate = False
    while (N // h) // groups >= 2:
        inc = np.linalg.norm(z[h::h] - z[:-h:h], axis=1)
        per_set = len(inc) // groups
        block = inc[: per_set * groups].reshape(groups, per_set).max(axis=0)
        if np.any(block <= 0.0):
            degenerate = True
            break
        lags.append(h * dt)
        logs.append(float(np.mean(np.log(block))))
        h *= 2
    if degenerate or len(lags) < 2:
        if not degenerate:
            logger.warning("too few dyadic scales for a regression; reporting exponent 1")
        return HolderEstimate(1.0, True, np.asarray(lags), np.asarray(logs))
    slope = np.polyfit(np.log(lags), logs, 1)[0]
    slope = float(min(max(slope, np.finfo(float).tiny), 1.0))
    return HolderEstimate(slope, False, np.asarray(lags), np.asarray(logs))
