"""Exploring sup_f L^f_1 over Hölder balls.

* ``dp_max_local_time`` maximizes a tube-occupation reward exactly over the
  lattice family T_n by dynamic programming.
* ``adversarial_curve`` builds the path-tracking plateau curves used to show
  the supremum is infinite when alpha < 1/2.
* ``dichotomy_experiment`` sweeps both regimes and fits growth exponents.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .brownian import BrownianPath, Seed, modulus_stopping_time, sample_path
from .curves import (
    REL_TOL,
    DyadicCurve,
    HolderParams,
    HolderVerdict,
    PiecewiseLinearCurve,
    dyadic_project,
    holder_check,
    lattice_scale,
    max_lattice_level,
    tn_level_matrix,
)
from .local_time import (
    TUBE_COUPLING,
    LocalTimeEstimate,
    check_tube_resolution,
    level_local_time_array,
    occupation_local_time,
)
from .stats import FitResult, ks_distance, loglog_fit

_NEG = -(1 << 60)
_CHUNK = 1 << 20


def default_reward_eps(n: int, alpha: float) -> float:
    """Half a lattice step, so tubes around adjacent levels barely overlap."""
    return 0.5 / lattice_scale(n, alpha)


def _repeat_allowed(alpha: float) -> bool:
    # two equal slopes in a row move 2 levels over lag 2/N; Hölder allows 2^alpha levels
    return 2.0 <= 2.0**alpha * (1 + REL_TOL)


@dataclass
class RewardTable:
    """counts[j, L + top, s]: grid times s_i in [j/N, (j+1)/N) whose path value
    lies within reward_eps of the segment leaving level L with slope sign
    (-1, +1)[s]."""

    counts: np.ndarray
    top: int
    n: int
    alpha: float
    reward_eps: float
    dt: float

    @property
    def unit(self) -> float:
        return self.dt / (2 * self.reward_eps)

    def objective(self, levels) -> int:
        levels = np.asarray(levels, dtype=np.int64)
        s = (np.diff(levels) > 0).astype(np.int64)
        return int(self.counts[np.arange(levels.size - 1), levels[:-1] + self.top, s].sum())


def reward_table(path: BrownianPath, n: int, alpha: float, reward_eps: float) -> RewardTable:
    N = 2**n
    if path.n_steps % N:
        raise ValueError(f"path grid ({path.n_steps} steps) must refine N={N}")
    r = path.n_steps // N
    scale = lattice_scale(n, alpha)
    top = max_lattice_level(n, alpha)
    width = 2 * top + 2
    half = reward_eps * scale  # tube half-width in lattice units
    tau = np.arange(r) / r
    w = path.values[:-1].reshape(N, r)
    diff = np.zeros((N, 2, width), dtype=np.int64)
    rows_per_chunk = max(1, _CHUNK // r)
    for c0 in range(0, N, rows_per_chunk):
        c1 = min(N, c0 + rows_per_chunk)
        u = w[c0:c1] * scale
        cell = np.repeat(np.arange(c0, c1), r)
        for s, sigma in enumerate((-1.0, 1.0)):
            x = (u - sigma * tau).ravel()
            lo = np.maximum(np.floor(x - half).astype(np.int64) + 1, -top)
            hi = np.minimum(np.ceil(x + half).astype(np.int64) - 1, top)
            ok = lo <= hi
            base = (cell[ok] * 2 + s) * width
            flat = diff.reshape(-1)
            flat += np.bincount(base + lo[ok] + top, minlength=flat.size)
            flat -= np.bincount(base + hi[ok] + top + 1, minlength=flat.size)
    counts = np.cumsum(diff, axis=2)[:, :, : width - 1]
    return RewardTable(np.ascontiguousarray(counts.transpose(0, 2, 1)), top, n, alpha, reward_eps, path.dt)


@dataclass
class DpResult:
    argmax: DyadicCurve
    value: float
    count: int
    recomputed: LocalTimeEstimate | None
    n: int
    alpha: float
    reward_eps: float


def _check_dp_inputs(path: BrownianPath, n: int, alpha: float, reward_eps: float) -> None:
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if reward_eps > default_reward_eps(n, alpha) * (1 + 1e-12):
        raise ValueError(f"reward_eps must be <= 1/(2N^alpha) = {default_reward_eps(n, alpha):.4g}")
    check_tube_resolution(path.dt, reward_eps)


def _solve(table: RewardTable):
    R = table.counts
    N, nL, _ = R.shape
    allow_repeat = _repeat_allowed(table.alpha)
    V = np.empty((N + 1, nL, 2), dtype=np.int64)
    V[N] = 0
    for j in range(N - 1, -1, -1):
        down = np.full(nL, _NEG, dtype=np.int64)
        up = np.full(nL, _NEG, dtype=np.int64)
        down[1:] = R[j, 1:, 0] + V[j + 1, :-1, 0]
        up[:-1] = R[j, :-1, 1] + V[j + 1, 1:, 1]
        if allow_repeat:
            V[j, :, 0] = V[j, :, 1] = np.maximum(down, up)
        else:
            V[j, :, 0] = up  # previous step went down, must go up
            V[j, :, 1] = down
    start_down = np.full(nL, _NEG, dtype=np.int64)
    start_up = np.full(nL, _NEG, dtype=np.int64)
    start_down[1:] = R[0, 1:, 0] + V[1, :-1, 0]
    start_up[:-1] = R[0, :-1, 1] + V[1, 1:, 1]
    start = np.maximum(start_down, start_up)

    # lowest start level, then the lower next level, among optimal choices:
    # the lexicographically smallest optimal level sequence
    L = int(np.argmax(start))
    best = int(start[L])
    levels = [L]
    prev = None
    for j in range(N):
        target = best if j == 0 else int(V[j, L, prev])
        can_down = L >= 1 and (allow_repeat or prev != 0 or j == 0)
        if can_down and int(R[j, L, 0]) + int(V[j + 1, L - 1, 0]) == target:
            prev, L = 0, L - 1
        else:
            prev, L = 1, L + 1
        levels.append(L)
    return best, np.array(levels) - table.top


def dp_max_local_time(path: BrownianPath, n: int, alpha: float, reward_eps: float | None = None,
                      recompute: bool = True) -> DpResult:
    """Exact maximizer over T_n of the summed per-segment tube reward.

    States are (grid time, level, sign of the previous slope); for alpha < 1
    the Hölder condition forbids two equal consecutive slopes, for alpha = 1
    every sign pattern is allowed.  Levels stay within the widened band.
    The argmax is re-scored by the occupation estimator with half the tube.
    """
    if reward_eps is None:
        reward_eps = default_reward_eps(n, alpha)
    _check_dp_inputs(path, n, alpha, reward_eps)
    table = reward_table(path, n, alpha, reward_eps)
    count, levels = _solve(table)
    argmax = DyadicCurve.from_levels(n, alpha, levels)
    recomputed = None
    if recompute:
        recomputed = occupation_local_time(path, argmax, reward_eps / 2, 1.0, strict=False)
    return DpResult(argmax, count * table.unit, count, recomputed, n, alpha, reward_eps)


def brute_force_max(path: BrownianPath, n: int, alpha: float, reward_eps: float | None = None,
                    cap: int = 1 << 22) -> DpResult:
    """Same objective maximized by scanning every member of T_n."""
    if reward_eps is None:
        reward_eps = default_reward_eps(n, alpha)
    _check_dp_inputs(path, n, alpha, reward_eps)
    table = reward_table(path, n, alpha, reward_eps)
    members = tn_level_matrix(n, alpha, cap)
    N = 2**n
    best, best_row = -1, None
    cols = np.arange(N)
    for c0 in range(0, len(members), 1 << 16):
        block = members[c0:c0 + (1 << 16)]
        s = (np.diff(block, axis=1) > 0).astype(np.int64)
        scores = table.counts[cols, block[:, :-1] + table.top, s].sum(axis=1)
        i = int(np.argmax(scores))
        if scores[i] > best:  # strict: keep the earliest (lexicographically smallest) row
            best, best_row = int(scores[i]), block[i]
    argmax = DyadicCurve.from_levels(n, alpha, best_row)
    return DpResult(argmax, best * table.unit, best, None, n, alpha, reward_eps)


def refinement_check(path: BrownianPath, coarse: DpResult):
    """Compare the T_{n+1} optimum with the projection of the T_n argmax.

    Returns (feasible, projected_count, dp_count) in T_{n+1} reward units,
    where ``feasible`` says whether the projection is a T_{n+1} member.
    """
    n1 = coarse.n + 1
    fine = dp_max_local_time(path, n1, coarse.alpha, recompute=False)
    try:
        proj = dyadic_project(coarse.argmax, n1, coarse.alpha)
    except ValueError:
        return False, None, fine.count
    band = 1 + 1 / lattice_scale(n1, coarse.alpha)
    if not holder_check(proj, HolderParams(coarse.alpha, band)):
        return False, None, fine.count
    table = reward_table(path, n1, coarse.alpha, fine.reward_eps)
    return True, table.objective(proj.levels), fine.count


def round_to_dyadic(x, m: int):
    """Nearest multiple of 2^-m, ties toward -infinity."""
    return np.ceil(np.asarray(x) * 2.0**m - 0.5) / 2.0**m


def plateau_curve(anchors: np.ndarray, n: int, alpha=None) -> PiecewiseLinearCurve:
    """Constant ``anchors[j-1]`` on [(j-1)/n, (j-1/2)/n], linear up to anchors[j] at j/n."""
    knots = np.arange(2 * n + 1) / (2 * n)
    values = np.empty(2 * n + 1)
    values[0::2] = anchors
    values[1::2] = anchors[:-1]
    return PiecewiseLinearCurve(knots, values, alpha)


@dataclass
class AdversaryCurve:
    n: int
    m: int
    alpha: float
    delta: float
    freeze_cells: int  # plateaus before the freeze point: floor(delta n / 2)
    f1: PiecewiseLinearCurve
    f2: PiecewiseLinearCurve
    f3: PiecewiseLinearCurve
    holder_f2: HolderVerdict
    holder: HolderVerdict

    @property
    def freeze_time(self) -> float:
        return self.freeze_cells / self.n

    @property
    def plateau_levels(self) -> np.ndarray:
        return self.f3.values[0:-1:2]


def default_rounding_exponent(n: int, alpha: float) -> int:
    return math.ceil(alpha * math.log2(n)) + 4


def adversarial_curve(path: BrownianPath, n: int, m: int | None = None, alpha: float = 0.25,
                      stop_resolution: int = 4096) -> AdversaryCurve:
    """Plateau curves tracking the path at times j/n.

    f1 holds W((j-1)/n) on the first half of each cell and interpolates to
    W(j/n) on the second half; f2 freezes f1 from floor(delta n / 2)/n on,
    the last multiple of 1/n not after delta/2; f3 rounds the anchor values
    of f2 to multiples of 2^-m.  delta is the grid modulus stopping time,
    computed on a subgrid of ``stop_resolution`` steps.
    """
    if not 0 < alpha < 0.5:
        raise ValueError(f"the adversarial construction needs alpha < 1/2, got {alpha}")
    if n < 4:
        raise ValueError(f"n must be at least 4, got {n}")
    if path.n_steps % n:
        raise ValueError(f"path grid ({path.n_steps} steps) must contain the times j/{n}")
    if m is None:
        m = default_rounding_exponent(n, alpha)
    res = min(path.n_steps, max(stop_resolution, n))
    if res % n:
        raise ValueError(f"stopping-time grid {res} must contain the times j/{n}")
    delta = min(modulus_stopping_time(path.coarsen(res), alpha), 1.0)
    anchors = path.values[:: path.n_steps // n]
    cells = int(math.floor(delta * n / 2))
    frozen = anchors.copy()
    frozen[cells + 1:] = anchors[cells]
    f1 = plateau_curve(anchors, n, alpha)
    f2 = plateau_curve(frozen, n, alpha)
    f3 = plateau_curve(round_to_dyadic(frozen, m), n, alpha)
    params = HolderParams(alpha)
    return AdversaryCurve(n, m, alpha, delta, cells, f1, f2, f3, holder_check(f2, params), holder_check(f3, params))


def _half_cell_windows(path: BrownianPath, n: int) -> np.ndarray:
    r = path.n_steps // n
    if r % 2:
        raise ValueError("path grid must contain the half-cell times (j - 1/2)/n")
    starts = np.arange(n) * r
    return path.values[starts[:, None] + np.arange(r // 2 + 1)]


def plateau_increments(path: BrownianPath, levels, n: int) -> np.ndarray:
    """Level local time at ``levels[j-1]`` accrued on [(j-1)/n, (j-1/2)/n], j = 1..n."""
    return level_local_time_array(_half_cell_windows(path, n), levels)


@dataclass
class AdversaryValue:
    """``tracking`` is the occupation local time along f3 up to delta/2, the
    stretch where f3 follows the path; ``occupation`` runs to t = 1."""

    tracking: float
    occupation: float
    plateau_sum: float
    delta: float


def adversary_local_time(path: BrownianPath, adv: AdversaryCurve, eps: float) -> AdversaryValue:
    occ = occupation_local_time(path, adv.f3, eps, 1.0).value
    tracking = occupation_local_time(path, adv.f3, eps, adv.delta / 2).value
    k = adv.freeze_cells
    inc = plateau_increments(path, adv.plateau_levels, adv.n)[:k]
    return AdversaryValue(tracking, occ, float(inc.sum()), adv.delta)


REFERENCE_STREAM_OFFSET = 1 << 40


@dataclass
class ScalingReport:
    n: int
    samples: np.ndarray = field(repr=False)
    reference: np.ndarray = field(repr=False)
    ks: float
    mean: float
    reference_mean: float
    steps_per_half_cell: int


def scaled_plateau_samples(n: int, n_paths: int, seed: Seed, steps_per_half_cell: int = 128,
                           n_samples: int | None = None, mapper=map) -> np.ndarray:
    """sqrt(2n) * (level local time at W((j-1)/n) over the half cell), pooled
    over cells and paths in (path, cell) order."""
    n_steps = 2 * n * steps_per_half_cell
    chunks = mapper(_PlateauTask(n, n_steps, seed), range(n_paths))
    y = np.concatenate(list(chunks)) * math.sqrt(2 * n)
    return y if n_samples is None else y[:n_samples]


class _PlateauTask:
    def __init__(self, n, n_steps, seed):
        self.n, self.n_steps, self.seed = n, n_steps, seed

    def __call__(self, i):
        path = sample_path(self.n_steps, self.seed.child(i))
        anchors = path.values[: -1: self.n_steps // self.n]
        return plateau_increments(path, anchors, self.n)


def reference_local_times(n_samples: int, seed: Seed, steps: int) -> np.ndarray:
    """Level-0 local time at t = 1 on fresh paths with ``steps`` increments."""
    out = np.empty(n_samples)
    for i in range(n_samples):
        path = sample_path(steps, seed.child(REFERENCE_STREAM_OFFSET + i))
        out[i] = level_local_time_array(path.values[None, :], 0.0)[0]
    return out


def scaling_check(n: int, n_paths: int, seed: Seed, n_samples: int = 5000,
                  steps_per_half_cell: int = 128, mapper=map) -> ScalingReport:
    """KS distance between rescaled plateau increments and level-0 local time.

    Both samples use ``steps_per_half_cell`` increments per unit of rescaled
    time, so Brownian scaling makes their laws identical on the grid too.
    """
    if n_paths < 1000:
        raise ValueError("scaling_check needs at least 1000 paths")
    y = scaled_plateau_samples(n, n_paths, seed, steps_per_half_cell, n_samples, mapper)
    if y.size < n_samples:
        raise ValueError(f"only {y.size} plateau samples for the requested {n_samples}")
    ref = reference_local_times(n_samples, seed, steps_per_half_cell)
    return ScalingReport(n, y, ref, ks_distance(y, ref), float(y.mean()), float(ref.mean()), steps_per_half_cell)


@dataclass
class GrowthReport:
    rows: list
    fits: dict
    records: list
    master_seed: int

    def to_json(self):
        return {
            "master_seed": self.master_seed,
            "fits": {str(a): f.to_json() for a, f in self.fits.items()},
            "rows": self.rows,
        }


def _n_steps_for(dt: float, minimum: int) -> int:
    k = max(minimum, 2)
    k = 1 << (k - 1).bit_length()
    while 1.0 / k > dt * (1 + 1e-12):
        k *= 2
    return k


def dp_branch_steps(alpha: float, ns) -> int:
    eps = default_reward_eps(int(math.log2(max(ns))), alpha)
    return _n_steps_for(eps * eps / TUBE_COUPLING, 4 * max(ns))


class _DichotomyTask:
    def __init__(self, alpha, ns, seed, n_steps, eps):
        self.alpha, self.ns, self.seed, self.n_steps, self.eps = alpha, ns, seed, n_steps, eps

    def __call__(self, i):
        seed = self.seed.child(i)
        path = sample_path(self.n_steps, seed)
        out = []
        for n in self.ns:
            if self.alpha > 0.5:
                res = dp_max_local_time(path, int(math.log2(n)), self.alpha)
                out.append({"alpha": self.alpha, "n": n, "seed": i, "dp_value": res.value,
                            "recomputed": res.recomputed.value, "adversary_value": None, "delta": None})
            else:
                adv = adversarial_curve(path, n, alpha=self.alpha)
                val = adversary_local_time(path, adv, self.eps)
                out.append({"alpha": self.alpha, "n": n, "seed": i, "dp_value": None, "recomputed": None,
                            "adversary_value": val.tracking, "full": val.occupation,
                            "plateau_sum": val.plateau_sum,
                            "delta": val.delta})
        return out


def dichotomy_experiment(alphas, ns, n_paths: int, seed: Seed, eps: float = 2.0**-8, mapper=map,
                         min_fit_points: int = 4) -> GrowthReport:
    """Mean of the maximized (alpha > 1/2) or adversarial (alpha < 1/2) local
    time against n, with a log-log fit per alpha.

    For alpha > 1/2 the entries of ``ns`` are N = 2^n and the statistic is the
    re-scored DP maximum over T_n; for alpha < 1/2 they are the plateau counts
    of the adversarial curve and the statistic is its occupation local time
    with tube ``eps`` up to delta/2 (the full-horizon value and the plateau
    sum are reported alongside).
    """
    ns = [int(n) for n in ns]
    if any(n < 4 or n & (n - 1) for n in ns):
        raise ValueError("every n must be a power of two >= 4")
    if sorted(set(ns)) != ns:
        raise ValueError("ns must be strictly increasing")
    if any(a == 0.5 or not 0 < a <= 1 for a in alphas):
        raise ValueError("alphas must lie in (0, 1/2) or (1/2, 1]")
    rows, records, fits = [], [], {}
    for alpha in alphas:
        if alpha > 0.5:
            n_steps = dp_branch_steps(alpha, ns)
            stats = ("recomputed", "dp_value")
        else:
            n_steps = _n_steps_for(eps * eps / TUBE_COUPLING, 4 * max(ns))
            stats = ("adversary_value", "full", "plateau_sum")
        task = _DichotomyTask(alpha, ns, seed, n_steps, eps)
        per_path = list(mapper(task, range(n_paths)))
        for rec_list in per_path:
            records.extend(rec_list)
        means = []
        for k, n in enumerate(ns):
            for name in stats:
                vals = np.array([p[k][name] for p in per_path], dtype=float)
                sem = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan")
                rows.append({"alpha": alpha, "n": n, "statistic": name, "mean": float(vals.mean()),
                             "sem": sem, "n_paths": int(vals.size), "n_steps": n_steps})
                if name == stats[0]:
                    means.append(float(vals.mean()))
        if len(ns) >= min_fit_points and all(m > 0 for m in means):
            fits[alpha] = loglog_fit(list(zip(ns, means)))
    return GrowthReport(rows, fits, records, seed.master)
