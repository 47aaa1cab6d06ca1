"""Small statistics used by the experiments: log-log fits, two-sample KS,
survival tables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    n_points: int

    def to_json(self):
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2, "n_points": self.n_points}


def linear_fit(x, y) -> FitResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("a fit needs at least 3 matching points")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return FitResult(float(slope), float(intercept), min(r2, 1.0), int(x.size))


def loglog_fit(points) -> FitResult:
    """Least squares line through (log x, log y)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (x, y) pairs")
    if np.any(pts <= 0):
        raise ValueError("log-log fit needs strictly positive x and y")
    return linear_fit(np.log(pts[:, 0]), np.log(pts[:, 1]))


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_distance needs two nonempty samples")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def survival(values, thresholds) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.array([np.mean(values >= lam) for lam in thresholds])


def log_survival_fit(values, thresholds) -> FitResult:
    """Line through (lambda, log P(X >= lambda)), skipping empty tail points."""
    thresholds = np.asarray(thresholds, dtype=float)
    s = survival(values, thresholds)
    keep = s > 0
    return linear_fit(thresholds[keep], np.log(s[keep]))
