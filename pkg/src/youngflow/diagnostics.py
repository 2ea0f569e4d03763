"""Convergence-rate helpers used by refinement studies."""

import numpy as np

__all__ = ["loglog_slope"]


def loglog_slope(mesh, error) -> float:
    """Least-squares slope of ``log(error)`` against ``log(mesh)``."""
    mesh = np.asarray(mesh, dtype=float)
    error = np.asarray(error, dtype=float)
    if mesh.shape != error.shape or mesh.size < 2:
        raise ValueError("need matching arrays with at least two points")
    if np.any(error <= 0) or np.any(mesh <= 0):
        raise ValueError("mesh sizes and errors must be positive")
    return float(np.polyfit(np.log(mesh), np.log(error), 1)[0])
