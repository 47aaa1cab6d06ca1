"""Local time of a Brownian path along a curve.

Three estimators are provided: the two-sided and one-sided tube occupation
densities, and the semimartingale (Tanaka) local time at zero of W - f.  The
potential U^f(x, t) gives the expected remaining local time from (x, t).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .brownian import (
    BrownianPath,
    Seed,
    kernel_integrand_sqrt_time,
    sqrt_time_nodes,
    standard_normals,
    sample_path,
)
from .curves import Curve, SampledCurve

log = logging.getLogger(__name__)

OCCUPATION_KINDS = ("occupation_two_sided", "occupation_one_sided")
# dt <= eps^2 / TUBE_COUPLING: a Brownian step (~sqrt(dt)) is a quarter of the tube width
TUBE_COUPLING = 16.0


@dataclass(frozen=True)
class LocalTimeEstimate:
    value: float
    t: float
    estimator: str
    dt: float
    eps: float | None = None
    raw: float | None = None  # unclipped value, tanaka kinds only


@dataclass(frozen=True)
class PotentialValue:
    x: float
    t: float
    value: float


def check_tube_resolution(dt: float, eps: float) -> None:
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if dt > eps * eps / TUBE_COUPLING * (1 + 1e-12):
        raise ValueError(
            f"path step dt={dt:.3g} too coarse for tube eps={eps:.3g}: "
            f"need dt <= eps^2/16 = {eps * eps / TUBE_COUPLING:.3g}"
        )


def _steps_before(path: BrownianPath, t: float) -> int:
    """Number of grid times s_j with s_j < t."""
    if not 0 <= t <= path.horizon:
        raise ValueError(f"t must lie in [0, {path.horizon}], got {t}")
    return int(np.searchsorted(path.times, t, side="left"))


def occupation_counts(w: np.ndarray, f: np.ndarray, eps: float, one_sided: bool = False) -> np.ndarray:
    """Indicator of the open tube (two sided) or [f, f + eps) (one sided)."""
    y = w - f
    if one_sided:
        return (y >= 0) & (y < eps)
    return np.abs(y) < eps


def occupation_local_time(path: BrownianPath, f: Curve, eps: float, t: float = 1.0, *, strict: bool = True):
    """(1/2eps) * time spent in the open eps-tube around f before t.

    Left-endpoint Riemann sum over grid times s < t.  With ``strict`` the
    path step must resolve the tube (dt <= eps^2/16).
    """
    if strict:
        check_tube_resolution(path.dt, eps)
    elif eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    m = _steps_before(path, t)
    hits = occupation_counts(path.values[:m], f(path.times[:m]), eps)
    return LocalTimeEstimate(np.count_nonzero(hits) * path.dt / (2 * eps), t, "occupation_two_sided", path.dt, eps)


def one_sided_local_time(path: BrownianPath, f: Curve, eps: float, t: float = 1.0, *, strict: bool = True):
    if strict:
        check_tube_resolution(path.dt, eps)
    elif eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    m = _steps_before(path, t)
    hits = occupation_counts(path.values[:m], f(path.times[:m]), eps, one_sided=True)
    return LocalTimeEstimate(np.count_nonzero(hits) * path.dt / eps, t, "occupation_one_sided", path.dt, eps)


def tanaka_increments(y: np.ndarray) -> np.ndarray:
    """Per-step terms |Y_{j+1}| - |Y_j| - sgn(Y_j)(Y_{j+1} - Y_j), sgn(0) = -1.

    Each term is nonnegative in exact arithmetic; their sum is the discrete
    Tanaka local time at zero.
    """
    sgn = np.where(y[:-1] > 0, 1.0, -1.0)
    return np.abs(y[1:]) - np.abs(y[:-1]) - sgn * np.diff(y)


def _tanaka(path: BrownianPath, f: Curve, t: float, kind: str, max_slope: float | None):
    slope = f.max_slope()
    if not math.isfinite(slope):
        raise ValueError("tanaka local time needs a Lipschitz curve")
    if max_slope is not None and slope > max_slope:
        raise ValueError(f"curve slope {slope:.6g} exceeds the Lipschitz bound {max_slope:.6g}")
    if not 0 <= t <= path.horizon:
        raise ValueError(f"t must lie in [0, {path.horizon}], got {t}")
    m = int(np.searchsorted(path.times, t, side="right")) - 1  # last grid time <= t
    y = path.values[: m + 1] - f(path.times[: m + 1])
    raw = float(np.sum(tanaka_increments(y)))
    value = raw
    if raw < 0:
        log.debug("clipping negative tanaka local time %.3g", raw)
        value = 0.0
    return LocalTimeEstimate(value, t, kind, path.dt, None, raw)


def tanaka_local_time(path: BrownianPath, f: Curve, t: float = 1.0, *, max_slope: float | None = None):
    return _tanaka(path, f, t, "tanaka", max_slope)


def level_local_time(path: BrownianPath, x: float, t: float = 1.0):
    """Ordinary local time at the constant level x."""
    return _tanaka(path, SampledCurve.constant(x), t, "level", None)


def level_local_time_array(w: np.ndarray, x) -> np.ndarray:
    """Tanaka level local time for many windows at once.

    ``w`` has shape (k, steps + 1) and ``x`` broadcasts against (k, 1).
    """
    y = w - np.asarray(x, dtype=float).reshape(-1, 1)
    sgn = np.where(y[:, :-1] > 0, 1.0, -1.0)
    terms = np.abs(y[:, 1:]) - np.abs(y[:, :-1]) - sgn * np.diff(y, axis=1)
    return terms.sum(axis=1)


def potential(f: Curve, x: float, t: float, quad_points: int = 4096) -> PotentialValue:
    """U^f(x, t) = int_0^{1-t} p(s, x, f(t + s)) ds.

    Computed in u = sqrt(s), which removes the s -> 0 singularity even when
    f(t) = x exactly.
    """
    if not 0 <= t < 1:
        raise ValueError(f"potential needs t in [0, 1), got {t}")
    u, w = sqrt_time_nodes(math.sqrt(1.0 - t), quad_points)
    gap = x - f(t + u * u)
    return PotentialValue(x, t, float(np.sum(w * kernel_integrand_sqrt_time(u, gap))))


DEFAULT_LAMBDAS = tuple(np.arange(1, 17) * 0.5)


@dataclass(frozen=True)
class TailTable:
    lambdas: np.ndarray
    survival: np.ndarray
    n_paths: int
    delta: float
    normalizer: float
    differences: np.ndarray  # normalized |dL^f - dL^g| per path

    def rows(self):
        return [(float(lam), float(s), self.n_paths) for lam, s in zip(self.lambdas, self.survival)]


def _window_paths(n_paths: int, seed: Seed, start: float, length: float, steps: int) -> np.ndarray:
    """Brownian values on [start, start + length] with ``steps`` increments, one row per path."""
    out = np.empty((n_paths, steps + 1))
    for i in range(n_paths):
        gen = seed.child(i).generator()
        z = standard_normals(gen, steps + 1)
        out[i, 0] = math.sqrt(start) * z[0]
        np.cumsum(z[1:] * math.sqrt(length / steps), out=out[i, 1:])
        out[i, 1:] += out[i, 0]
    return out


def increment_difference_tail(
    f: Curve,
    g: Curve,
    j: int,
    N: int,
    n_paths: int,
    seed: Seed,
    eps: float = 2.0**-7,
    dt: float | None = None,
    lambdas=DEFAULT_LAMBDAS,
) -> TailTable:
    """Survival function of |dL^f - dL^g| / (N^(-1/4) (delta log 1/delta)^(1/2))
    over the cell [(j-1)/N, j/N], with occupation estimates of both increments.

    Only the cell is simulated: W((j-1)/N) is drawn exactly, then the path
    runs on a grid fine enough for ``eps``.
    """
    if not 1 <= j <= N:
        raise ValueError(f"cell index j must lie in 1..{N}")
    lo, hi = (j - 1) / N, j / N
    knots = np.union1d(np.union1d(f.knots, g.knots), [lo, hi])
    knots = knots[(knots >= lo) & (knots <= hi)]
    delta = float(np.max(np.abs(f(knots) - g(knots))))
    if not delta < 0.5:
        raise ValueError(f"sup distance on the cell must be < 1/2, got {delta}")
    if dt is None:
        dt = eps * eps / TUBE_COUPLING
    check_tube_resolution(dt, eps)
    steps = 1 << max(0, math.ceil(math.log2((hi - lo) / dt)))
    w = _window_paths(n_paths, seed, lo, hi - lo, steps)
    times = lo + np.arange(steps) * ((hi - lo) / steps)
    step = (hi - lo) / steps
    fv, gv = f(times), g(times)
    occ_f = occupation_counts(w[:, :-1], fv, eps).sum(axis=1) * step / (2 * eps)
    occ_g = occupation_counts(w[:, :-1], gv, eps).sum(axis=1) * step / (2 * eps)
    diff = np.abs(occ_f - occ_g)
    lambdas = np.asarray(lambdas, dtype=float)
    if delta == 0:
        normalizer = 1.0
        normalized = diff
    else:
        normalizer = N**-0.25 * math.sqrt(delta * math.log(1 / delta))
        normalized = diff / normalizer
    survival = np.array([np.mean(normalized >= lam) for lam in lambdas])
    return TailTable(lambdas, survival, n_paths, delta, normalizer, normalized)


def ensemble_local_times(n_paths: int, seed: Seed, n_steps: int, fn, mapper=map) -> np.ndarray:
    """Evaluate ``fn(path)`` on paths with stream indices 0..n_paths-1, in index order."""
    return np.array(list(mapper(_EnsembleTask(seed, n_steps, fn), range(n_paths))))


class _EnsembleTask:
    def __init__(self, seed, n_steps, fn):
        self.seed, self.n_steps, self.fn = seed, n_steps, fn

    def __call__(self, i):
        return self.fn(sample_path(self.n_steps, self.seed.child(i)))

