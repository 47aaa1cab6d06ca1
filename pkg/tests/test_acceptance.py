"""Acceptance criteria, run at their stated sizes and tolerances.

Each test records one PASS/FAIL line (printed in the terminal summary).
Every criterion uses its own number as the master seed.
"""
import math
import time

import numpy as np
import pytest

from holder_localtime.brownian import Seed, refine_path, sample_path
from holder_localtime.census import band_indicators, joint_hit_census
from holder_localtime.curves import (
    SampledCurve,
    dyadic_project,
    kernel_distance,
    random_dyadic_curve,
    random_holder_curve,
    sup_distance,
)
from holder_localtime.local_time import occupation_local_time, tanaka_local_time
from holder_localtime.stats import ks_distance, log_survival_fit, loglog_fit
from holder_localtime.sup_explorer import (
    brute_force_max,
    dichotomy_experiment,
    dp_branch_steps,
    dp_max_local_time,
    scaled_plateau_samples,
    scaling_check,
)

SQRT_2_PI = math.sqrt(2 / math.pi)
ZERO = SampledCurve.constant(0.0)


def test_level_local_time_mean(acceptance_record):
    start = time.perf_counter()
    vals = np.array([
        occupation_local_time(sample_path(2**14, Seed(1, i)), ZERO, 2**-6, strict=False).value
        for i in range(4096)
    ])
    elapsed = time.perf_counter() - start
    err = abs(vals.mean() - SQRT_2_PI)
    ok = err <= 0.03
    acceptance_record(1, ok, f"mean L^0_1 = {vals.mean():.4f} vs {SQRT_2_PI:.4f} (|err| {err:.4f} <= 0.03), "
                             f"{elapsed:.1f} s")
    assert ok


def _random_s1_curves(count, rng):
    curves = []
    while len(curves) < count:
        c = random_dyadic_curve(4, 1.0, rng)
        if not c.widened:
            curves.append(c)
    return curves


def test_estimator_equivalence(acceptance_record):
    curves = _random_s1_curves(100, Seed(2).generator())
    coarse, fine = [], []
    for i, c in enumerate(curves):
        p = sample_path(2**16, Seed(2, 1 + i))
        coarse.append(abs(tanaka_local_time(p, c).value - occupation_local_time(p, c, 2**-7, strict=False).value))
        q = refine_path(p, 2, Seed(2, 1000 + i))
        fine.append(abs(tanaka_local_time(q, c).value - occupation_local_time(q, c, 2**-8, strict=False).value))
    m1, m2 = float(np.median(coarse)), float(np.median(fine))
    ok = m1 <= 0.05 and m2 < m1
    acceptance_record(2, ok, f"median |tanaka - occupation| {m1:.4f} (<= 0.05) -> {m2:.4f} after halving")
    assert ok


def test_band_hit_sqrt_law(acceptance_record):
    N = 2**10
    ks = 2 ** np.arange(4, 11)
    A = np.empty((2000, ks.size))
    for i in range(2000):
        ind = band_indicators(sample_path(4 * N, Seed(3, i)), 0.0, 1 / math.sqrt(N), N)
        A[i] = np.cumsum(ind)[ks - 1]
    slope = loglog_fit(list(zip(ks, A.mean(axis=0)))).slope
    lam = np.linspace(1, 4, 13)
    tail = log_survival_fit(A[:, -1] / math.sqrt(N), lam)
    ok = 0.4 <= slope <= 0.6 and tail.slope < 0 and tail.r2 >= 0.8
    acceptance_record(3, ok, f"slope {slope:.3f} in [0.4, 0.6]; log-survival slope {tail.slope:.3f}, "
                             f"R^2 {tail.r2:.3f} >= 0.8")
    assert ok


def test_joint_hit_ceiling(acceptance_record):
    alpha, Ns, n_paths = 0.75, [2**k for k in range(6, 12)], 16
    steps = dp_branch_steps(alpha, Ns)
    joint = np.zeros(len(Ns))
    for i in range(n_paths):
        p = sample_path(steps, Seed(4, i))
        for k, N in enumerate(Ns):
            dp = dp_max_local_time(p, int(math.log2(N)), alpha, recompute=False)
            joint[k] += joint_hit_census(p, dp.argmax, N, alpha).joint
    fit = loglog_fit(list(zip(Ns, joint / n_paths)))
    ok = fit.slope <= 0.85
    acceptance_record(4, ok, f"joint-hit exponent {fit.slope:.3f} <= 0.85 (R^2 {fit.r2:.3f}, {n_paths} paths, "
                             f"{steps} steps)")
    assert ok


def test_dichotomy(acceptance_record):
    low = dichotomy_experiment([0.25], [64, 128, 256, 512, 1024], 200, Seed(5))
    exponent = low.fits[0.25].slope
    high = dichotomy_experiment([0.8], [16, 32, 64, 128, 256], 200, Seed(5))
    means = [r["mean"] for r in high.rows if r["statistic"] == "recomputed"]
    rise = means[-1] / means[-2] - 1
    ok = 0.3 <= exponent <= 0.7 and rise <= 0.10
    acceptance_record(5, ok, f"alpha=0.25 exponent {exponent:.3f} in [0.3, 0.7] (R^2 {low.fits[0.25].r2:.3f}); "
                             f"alpha=0.8 last doubling {100 * rise:+.1f}% <= 10%")
    assert ok


def test_scaling_identity(acceptance_record):
    rep8 = scaling_check(8, 1000, Seed(6), n_samples=5000)
    rep16 = scaling_check(16, 1000, Seed(6), n_samples=5000)
    a = scaled_plateau_samples(8, 1000, Seed(6, 1 << 20), n_samples=5000)
    b = scaled_plateau_samples(16, 1000, Seed(6, 1 << 21), n_samples=5000)
    across = ks_distance(a, b)
    ok = rep8.ks <= 0.05 and rep16.ks <= 0.05 and across <= 0.05
    acceptance_record(6, ok, f"KS vs reference n=8 {rep8.ks:.4f}, n=16 {rep16.ks:.4f}; n vs 2n {across:.4f} "
                             f"(all <= 0.05)")
    assert ok


def test_projection_bound(acceptance_record):
    violations, checks = 0, 0
    alphas = [0.2, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 1.0]
    for i in range(100):
        alpha = alphas[i % len(alphas)]
        h = random_holder_curve(alpha, Seed(7, i).generator())
        for n in range(3, 9):
            checks += 1
            violations += sup_distance(h, dyadic_project(h, n, alpha)) > 2 / 2 ** (n * alpha)
    ok = violations == 0
    acceptance_record(7, ok, f"{violations} violations in {checks} projections")
    assert ok


@pytest.mark.parametrize("alpha", [0.6, 0.75, 1.0])
def test_dp_brute_force_oracle(acceptance_record, alpha):
    mismatches, runs = 0, 0
    for n in range(1, 5):
        steps = dp_branch_steps(alpha, [2**n])
        for i in range(50):
            p = sample_path(steps, Seed(8, i))
            dp = dp_max_local_time(p, n, alpha, recompute=False)
            bf = brute_force_max(p, n, alpha)
            runs += 1
            mismatches += not (dp.value == bf.value and dp.argmax == bf.argmax)
    ok = mismatches == 0
    acceptance_record(8, ok, f"alpha={alpha}: {mismatches} mismatches in {runs} (n = 1..4, 50 paths each)")
    assert ok


def test_kernel_distance_scaling(acceptance_record):
    ratios = []
    for k in range(4, 11):
        eps = 2.0**-k
        ratios.append(kernel_distance(ZERO, SampledCurve.constant(eps)) / (eps * math.log(1 / eps)))
    spread = max(ratios) / min(ratios)
    ok = spread <= 3
    acceptance_record(9, ok, f"ratio range [{min(ratios):.3f}, {max(ratios):.3f}], spread {spread:.2f} <= 3")
    assert ok
