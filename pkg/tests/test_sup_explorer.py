import math

import numpy as np
import pytest

from holder_localtime.brownian import Seed, sample_path, synthetic_path
from holder_localtime.curves import (
    DyadicCurve,
    HolderParams,
    holder_check,
    lattice_scale,
    sup_distance,
    tn_level_matrix,
)
from holder_localtime.local_time import level_local_time_array, occupation_local_time
from holder_localtime.stats import ks_distance
from holder_localtime.sup_explorer import (
    adversarial_curve,
    adversary_local_time,
    brute_force_max,
    default_reward_eps,
    default_rounding_exponent,
    dichotomy_experiment,
    dp_branch_steps,
    dp_max_local_time,
    plateau_curve,
    plateau_increments,
    refinement_check,
    reward_table,
    round_to_dyadic,
    scaled_plateau_samples,
    scaling_check,
)


def steps_for(n, alpha):
    return dp_branch_steps(alpha, [2**n])


# ---- DP ------------------------------------------------------------------

def test_dp_on_zero_path_matches_brute_force():
    p = synthetic_path(0.0, steps_for(1, 1.0))
    dp = dp_max_local_time(p, 1, 1.0)
    bf = brute_force_max(p, 1, 1.0)
    assert dp.count == bf.count and dp.argmax == bf.argmax


@pytest.mark.parametrize("n,alpha", [(1, 1.0), (2, 0.75), (2, 1.0), (3, 0.6), (3, 0.9), (4, 0.75), (4, 1.0)])
def test_dp_equals_brute_force(n, alpha):
    steps = steps_for(n, alpha)
    for i in range(4):
        p = sample_path(steps, Seed(1, i))
        dp = dp_max_local_time(p, n, alpha, recompute=False)
        bf = brute_force_max(p, n, alpha)
        assert dp.count == bf.count
        assert dp.argmax == bf.argmax
        assert dp.value == bf.value


def test_reward_counts_match_direct_tube_count():
    n, alpha = 2, 0.75
    p = sample_path(steps_for(n, alpha), Seed(2))
    eps = default_reward_eps(n, alpha)
    table = reward_table(p, n, alpha, eps)
    N = 2**n
    r = p.n_steps // N
    for row in tn_level_matrix(n, alpha)[::7]:
        c = DyadicCurve.from_levels(n, alpha, row)
        direct = np.count_nonzero(np.abs(p.values[:-1] - c(p.times[:-1])) < eps)
        assert table.objective(row) == direct
    assert r * N == p.n_steps


def test_dp_value_bounds_zero_curve_reward():
    n, alpha = 3, 0.75
    p = synthetic_path(0.0, steps_for(n, alpha))
    dp = dp_max_local_time(p, n, alpha)
    # T_n holds no flat curve for alpha < 1; the zigzag 0,1,0,1,... is the feasible competitor
    zigzag = np.arange(2**n + 1) % 2
    table = reward_table(p, n, alpha, dp.reward_eps)
    assert dp.count >= table.objective(zigzag) > 0
    assert dp.value >= table.objective(zigzag) * table.unit
    assert holder_check(dp.argmax, HolderParams(alpha, 1 + 1 / lattice_scale(n, alpha)))


def test_dp_translation_symmetry():
    n, alpha = 3, 0.75
    steps = steps_for(n, alpha)
    small = synthetic_path(lambda t: 0.2 * np.sin(7 * t), steps)
    shift = 1 / lattice_scale(n, alpha)
    a = dp_max_local_time(small, n, alpha, recompute=False)
    b = dp_max_local_time(small.shifted(shift), n, alpha, recompute=False)
    assert a.count == b.count
    assert np.array_equal(b.argmax.levels, a.argmax.levels + 1)


def test_dp_preconditions():
    p = sample_path(256, Seed(4))
    with pytest.raises(ValueError):
        dp_max_local_time(p, 3, 0.75)  # dt too coarse for the tube
    fine = sample_path(steps_for(3, 0.75), Seed(4))
    with pytest.raises(ValueError):
        dp_max_local_time(fine, 3, 0.75, reward_eps=1.0)


def test_dp_recompute_and_refinement_check():
    n, alpha = 3, 0.8
    p = sample_path(steps_for(n + 1, alpha), Seed(5))
    dp = dp_max_local_time(p, n, alpha)
    assert dp.recomputed.eps == pytest.approx(dp.reward_eps / 2)
    assert dp.recomputed.value == occupation_local_time(p, dp.argmax, dp.reward_eps / 2, strict=False).value
    feasible, proj, fine = refinement_check(p, dp)
    if feasible:
        assert fine >= proj


# ---- adversary -----------------------------------------------------------

def test_round_to_dyadic_ties_down():
    assert round_to_dyadic(0.375, 2) == 0.25
    assert round_to_dyadic(-0.375, 2) == -0.5
    assert round_to_dyadic(0.4, 2) == 0.5


def test_plateau_curve_shape():
    c = plateau_curve(np.array([0.0, 0.5, -0.5]), 2)
    assert np.allclose(c.knots, [0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(c.values, [0.0, 0.0, 0.5, 0.5, -0.5])


def test_adversary_on_zero_path():
    adv = adversarial_curve(synthetic_path(0.0, 1024), 16)
    assert adv.delta == 1.0
    assert np.all(adv.f3.values == 0)
    assert adv.holder


def test_adversary_rejects_bad_inputs():
    p = sample_path(1024, Seed(6))
    with pytest.raises(ValueError):
        adversarial_curve(p, 16, alpha=0.5)
    with pytest.raises(ValueError):
        adversarial_curve(p, 2)


def test_adversary_structure_and_validity():
    n, alpha = 64, 0.25
    for i in range(500):
        p = sample_path(4096, Seed(7, i))
        adv = adversarial_curve(p, n, alpha=alpha)
        assert adv.delta > 0
        assert adv.holder and adv.holder_f2
        assert adv.m == default_rounding_exponent(n, alpha)
        levels = adv.plateau_levels
        assert np.all(levels * 2**adv.m == np.round(levels * 2**adv.m))
        assert sup_distance(adv.f2, adv.f3) <= 2.0 ** -(adv.m + 1) + 1e-15
        # frozen after delta/2
        t = np.linspace(adv.delta / 2, 1, 50)
        assert np.ptp(adv.f3(t)) == 0
        assert adv.freeze_time <= adv.delta / 2


def test_plateau_increments_match_level_local_time():
    n = 8
    p = sample_path(2048, Seed(8))
    levels = np.linspace(-0.2, 0.2, n)
    inc = plateau_increments(p, levels, n)
    r = p.n_steps // n
    for j in range(n):
        w = p.values[j * r: j * r + r // 2 + 1]
        assert inc[j] == pytest.approx(level_local_time_array(w[None, :], levels[j])[0])


def test_adversary_value_fields():
    p = sample_path(2**18, Seed(9))
    adv = adversarial_curve(p, 64)
    val = adversary_local_time(p, adv, 2**-7)
    assert 0 <= val.tracking <= val.occupation
    assert val.delta == adv.delta


# ---- scaling identity ----------------------------------------------------

def test_scaling_check_ks_and_mean():
    rep = scaling_check(8, 1000, Seed(10), n_samples=5000)
    assert rep.samples.size == 5000 and rep.reference.size == 5000
    assert rep.ks <= 0.05
    assert abs(rep.mean - math.sqrt(2 / math.pi)) <= 0.03
    assert rep.ks == pytest.approx(ks_distance(rep.samples, rep.reference))


def test_scaling_invariance_across_n():
    a = scaled_plateau_samples(8, 1000, Seed(11), n_samples=5000)
    b = scaled_plateau_samples(16, 1000, Seed(12), n_samples=5000)
    assert ks_distance(a, b) <= 0.05


def test_scaling_check_needs_paths():
    with pytest.raises(ValueError):
        scaling_check(8, 999, Seed(0))


# ---- dichotomy -----------------------------------------------------------

def test_dichotomy_schema_single_n():
    rep = dichotomy_experiment([0.8], [8], 3, Seed(13))
    assert [(r["alpha"], r["n"], r["statistic"]) for r in rep.rows] == [(0.8, 8, "recomputed"), (0.8, 8, "dp_value")]
    assert rep.fits == {}
    assert len(rep.records) == 3


def test_dichotomy_both_regimes_and_determinism():
    args = ([0.25, 0.8], [4, 8, 16, 32], 4, Seed(14))
    a = dichotomy_experiment(*args)
    b = dichotomy_experiment(*args)
    assert a.records == b.records
    assert set(a.fits) == {0.25, 0.8}
    stats_low = {r["statistic"] for r in a.rows if r["alpha"] == 0.25}
    assert stats_low == {"adversary_value", "full", "plateau_sum"}
    assert a.to_json()["master_seed"] == 14


def test_dichotomy_rejects_bad_inputs():
    with pytest.raises(ValueError):
        dichotomy_experiment([0.5], [4, 8, 16, 32], 2, Seed(0))
    with pytest.raises(ValueError):
        dichotomy_experiment([0.25], [8, 4], 2, Seed(0))
    with pytest.raises(ValueError):
        dichotomy_experiment([0.25], [6], 2, Seed(0))
