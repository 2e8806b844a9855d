import math

import numpy as np
import pytest
from scipy import stats

from curres.mass import (InsufficientDataError, MassPath, fold, folded_normal_cdf, folded_normal_quantile,
                         mass_walk_path, mass_walk_sample, mass_walk_step, supercritical_mass_test, tightness_check,
                         write_samples_csv)

TWO_PHI_ONE_MINUS_ONE = 0.6826894921370859


def test_step_at_zero_is_fair_and_non_negative():
    rng = np.random.default_rng(0)
    out = [mass_walk_step(0, 0.02, 1.0, rng) for _ in range(4000)]
    assert set(out) <= {0, 1}
    assert stats.binomtest(sum(out), 4000, 0.5).pvalue > 0.01


def test_jump_directions_are_fair():
    rng = np.random.default_rng(1)
    ups = sum(mass_walk_step(50, 0.02, 1.0, rng) == 51 for _ in range(10_000))
    assert stats.chisquare([ups, 10_000 - ups]).pvalue >= 0.01


def test_short_horizon_mean_is_start():
    rng = np.random.default_rng(2)
    x = mass_walk_sample(200, 0.02, 1.0, 500.0, 20_000, rng)
    assert abs(x.mean() - 200) < 4 * x.std() / math.sqrt(x.size)


def test_path_tallies_and_reflection():
    rng = np.random.default_rng(3)
    times = np.linspace(0, 5e4, 2001)
    path, tallies = mass_walk_path(2, 0.02, 1.0, times, rng)
    assert np.all(path.values >= 0)
    jumps, suppressed, up = tallies
    down = jumps - up - suppressed
    assert path.values[-1] == 2 + up - down
    assert path.rescaled()[0] == pytest.approx(0.04)


def test_exact_sampler_matches_event_walk():
    rng = np.random.default_rng(4)
    a = mass_walk_sample(3, 0.02, 1.0, 2000.0, 3000, rng)
    b = [mass_walk_path(3, 0.02, 1.0, [2000.0], rng)[0].values[0] for _ in range(3000)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_fold():
    assert fold(np.array([3, 0, -1, -2, -5])).tolist() == [3, 0, 0, 1, 4]


def test_folded_normal_values():
    assert folded_normal_cdf(1.0, 0.0, 1.0) == pytest.approx(TWO_PHI_ONE_MINUS_ONE, abs=1e-12)
    assert folded_normal_cdf(1e3, 0.5, 1.0) == pytest.approx(1.0)
    assert folded_normal_cdf(-1.0, 0.5, 1.0) == 0.0
    x = np.linspace(5, 15, 11)
    assert np.max(np.abs(folded_normal_cdf(x, 10.0, 1.0) - stats.norm.cdf(x, 10.0, 1.0))) <= 1e-6
    q = folded_normal_quantile(0.9, 1.0, 2.0)
    assert folded_normal_cdf(q, 1.0, 2.0) == pytest.approx(0.9, abs=1e-9)


def test_ks_null_calibration():
    rng = np.random.default_rng(5)
    N, reps = 200, 200
    hits = 0
    for _ in range(reps):
        x = np.abs(1.0 + rng.standard_normal(N))
        hits += supercritical_mass_test(x, 1.0, 1.0, 1.0).verdict
    assert hits / reps >= 0.95 - 2 * math.sqrt(0.05 * 0.95 / reps)


def test_walk_meets_reflected_gaussian_with_walk_variance():
    eps = 1 / 50
    rng = np.random.default_rng(6)
    x = eps * mass_walk_sample(50, eps, 1.0, 1.0 / eps ** 3, 200, rng)
    rep = supercritical_mass_test(x, 1.0, 1.0, 1.0, threshold=0.1, variance=2.0)
    assert rep.verdict


def test_degenerate_variance_skips():
    with pytest.warns(RuntimeWarning):
        rep = supercritical_mass_test(np.ones(100), 1.0, 1.0, 0.0)
    assert rep.statistic is None and rep.verdict is None and "skipped" in rep.note


def test_too_few_replicas():
    with pytest.raises(InsufficientDataError):
        supercritical_mass_test(np.ones(10), 1.0, 1.0, 1.0)


def test_hydro_tightness_small_eps():
    eps = 1 / 2000
    rng = np.random.default_rng(7)
    x = eps * mass_walk_sample(1000, eps, 1.0, 1.0 / eps ** 2, 2000, rng)
    assert tightness_check(x, "hydrodynamic", 0.1, start=0.5).passed


def test_hydro_tightness_coarse_eps_fails():
    # at eps = 1/100 the rescaled sd is sqrt(2 eps) = 0.14 > 0.1
    eps = 1 / 100
    rng = np.random.default_rng(8)
    x = eps * mass_walk_sample(50, eps, 1.0, 1.0 / eps ** 2, 2000, rng)
    assert not tightness_check(x, "hydrodynamic", 0.1, start=0.5).passed


def test_super_tightness_at_oracle_quantile():
    eps = 1 / 50
    rng = np.random.default_rng(9)
    x = eps * mass_walk_sample(50, eps, 1.0, 1.0 / eps ** 3, 1000, rng)
    M = folded_normal_quantile(1 - 0.05, 1.0, 2.0) + 0.2
    assert tightness_check(x, "super", 0.1, M=M).passed


def test_zero_rate_is_constant():
    path, tallies = mass_walk_path(7, 0.02, 0.0, [1.0, 10.0], np.random.default_rng(0))
    assert path.values.tolist() == [7, 7] and tallies.sum() == 0


def test_masspath_validation():
    with pytest.raises(ValueError):
        MassPath([0.0, 1.0], [1, -1], 0.1, 1.0)


def test_samples_csv(tmp_path):
    write_samples_csv([0.1, 0.2], tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0].startswith("#") and lines[1] == "replica_id,value" and len(lines) == 4
