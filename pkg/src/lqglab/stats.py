"""Small statistical helpers: least squares, bootstrap, and a slope estimator."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

__all__ = ["ols_slope", "bootstrap", "bootstrap_stderr", "mean_stderr", "LogLogSlope"]


def ols_slope(x, y):
    """Least-squares ``(slope, intercept)`` of ``y`` on ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.shape != y.shape:
        raise ValueError("need at least two matching points")
    xm = x.mean()
    dx = x - xm
    sxx = dx @ dx
    if sxx == 0:
        raise ValueError("x values are all equal")
    slope = (dx @ (y - y.mean())) / sxx
    return float(slope), float(y.mean() - slope * xm)


def bootstrap(stat, data, n_boot=1000, rng=0):
    """Statistic recomputed on ``n_boot`` row-resamples of ``data``."""
    data = np.asarray(data)
    rng = np.random.default_rng(rng)
    n = data.shape[0]
    return np.array([stat(data[rng.integers(0, n, n)]) for _ in range(int(n_boot))])


def bootstrap_stderr(stat, data, n_boot=1000, rng=0):
    reps = bootstrap(stat, data, n_boot, rng)
    return float(np.std(reps, ddof=1))


def mean_stderr(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()) if x.size else float("nan"), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


class LogLogSlope(BaseEstimator):
    """Slope of ``log mean(Y**p)`` against ``log scale`` with bootstrap stderr.

    ``fit(Y, scales)`` takes ``Y`` of shape ``(n_samples, n_scales)``; rows
    are resampled together so correlations between scales are kept.
    """

    def __init__(self, p=1.0, n_boot=1000, random_state=0):
        self.p = p
        self.n_boot = n_boot
        self.random_state = random_state

    def _slope(self, Y, lx):
        m = np.mean(Y ** self.p, axis=0)
        if np.any(m <= 0) or not np.all(np.isfinite(m)):
            raise ValueError("moments must be positive and finite")
        return ols_slope(lx, np.log(m))

    def fit(self, Y, scales):
        Y = np.asarray(Y, dtype=float)
        scales = np.asarray(scales, dtype=float)
        if Y.ndim != 2 or Y.shape[1] != scales.size:
            raise ValueError("Y must have one column per scale")
        if np.any(scales <= 0):
            raise ValueError("scales must be positive")
        lx = np.log(scales)
        self.slope_, self.intercept_ = self._slope(Y, lx)
        reps = bootstrap(lambda d: self._slope(d, lx)[0], Y, self.n_boot, self.random_state)
        self.stderr_ = float(np.std(reps, ddof=1)) if self.n_boot > 1 else float("nan")
        self.n_samples_ = Y.shape[0]
        self.moments_ = np.mean(Y ** self.p, axis=0)
        return self
