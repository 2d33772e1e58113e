"""Small numerical kernels shared by the functionals and solvers."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

# Below this relative gap the log-mean switches to its Taylor series.
_SERIES_GAP = 1e-4


def logmean_inv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(log a - log b) / (a - b), the mean of 1/x over a linear ramp from a to b.

    Equals 1/a when a == b. Inputs must be positive.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    x = d / a
    small = np.abs(x) < _SERIES_GAP
    out = np.empty(np.broadcast(a, b).shape)
    xs = np.where(small, x, 0.0)
    series = (1.0 - xs / 2 + xs**2 / 3 - xs**3 / 4 + xs**4 / 5) / a
    safe_d = np.where(small, 1.0, d)
    exact = np.log1p(np.where(small, 0.0, x)) / safe_d
    out[...] = np.where(small, series, exact)
    return out


def logmean_inv_grad(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`logmean_inv` with respect to ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    r = d / a
    small = np.abs(r) < _SERIES_GAP
    rs = np.where(small, r, 0.0)
    a2 = a * a
    da_series = (-1 / 2 + rs / 3 - rs**2 / 4 + rs**3 / 5) / a2
    db_series = (-1 / 2 + 2 * rs / 3 - 3 * rs**2 / 4 + 4 * rs**3 / 5) / a2
    lm = logmean_inv(a, b)
    safe_d = np.where(small, 1.0, d)
    da_exact = (lm - 1.0 / a) / safe_d
    db_exact = (1.0 / b - lm) / safe_d
    return np.where(small, da_series, da_exact), np.where(small, db_series, db_exact)


@lru_cache(maxsize=8)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def sign_changes(coefficients: np.ndarray, rel_tol: float = 1e-14) -> int:
    """Number of strict sign changes in a coefficient sequence, zeros skipped."""
    coef = np.asarray(coefficients, dtype=float)
    scale = float(np.max(np.abs(coef))) if coef.size else 0.0
    signs = np.sign(coef[np.abs(coef) > rel_tol * scale])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))
