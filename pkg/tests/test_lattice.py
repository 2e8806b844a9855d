import numpy as np
import pytest
from hypothesis import given, strategies as st

from curres.fenwick import FenwickTree
from curres.lattice import (LatticeParams, ParticleConfig, build_initial_config, check_admissible,
                            empirical_average, mass_density, rightmost_occupied, suffix_count, suffix_table)
from curres.profiles import ProfileSpec


def cfg_from(sites, size=10):
    c = np.zeros(size + 1, dtype=np.int64)
    for s in sites:
        c[s] += 1
    return ParticleConfig(c)


def test_params_reject_non_integer_inverse():
    with pytest.raises(ValueError):
        LatticeParams(0.003, 1.0)
    with pytest.raises(ValueError):
        LatticeParams(0.01, 0.0)
    assert LatticeParams(1 / 100, 1.0).size == 100


def test_rightmost_examples():
    assert rightmost_occupied(cfg_from([])) is None
    assert rightmost_occupied(cfg_from([3, 7])) == 7
    assert rightmost_occupied(cfg_from([0])) == 0


def test_suffix_examples():
    c = cfg_from([1, 1, 4, 9])
    assert suffix_count(c, 0) == c.total
    assert suffix_count(cfg_from([2, 5]), 3) == 1
    assert suffix_count(cfg_from([]), 6) == 0
    with pytest.raises(IndexError):
        suffix_count(c, 11)


def test_empirical_average_examples():
    assert empirical_average(ParticleConfig(np.full(11, 2)), 3, 5) == 2
    c = ParticleConfig(np.arange(11))
    assert empirical_average(c, 6, 1) == 6
    assert empirical_average(c, 0, 4) == 1.5
    with pytest.raises(IndexError):
        empirical_average(c, 8, 4)


def test_build_uniform_quarter():
    params = LatticeParams(1 / 4, 1.0)
    cfg = build_initial_config(params, ProfileSpec.uniform(1.0))
    assert np.cumsum(cfg.counts)[:4].tolist() == [1, 2, 3, 4]
    assert cfg.counts[4] == 0 and cfg.total == 4


def test_build_zero_profile_is_empty():
    cfg = build_initial_config(LatticeParams(1 / 50, 1.0), ProfileSpec.uniform(0.0))
    assert cfg.total == 0


@pytest.mark.parametrize("M", [0.1, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("inv", [100, 400])
def test_build_linear_admissible_and_mass(M, inv):
    params = LatticeParams(1 / inv, 1.0)
    spec = ProfileSpec.linear(M, 1.0)
    cfg = build_initial_config(params, spec)
    assert check_admissible(cfg, spec, params).ok
    assert abs(mass_density(cfg, params) - M) <= params.eps + 1e-12


def test_mass_density_examples():
    params = LatticeParams(1 / 100, 1.0)
    assert mass_density(ParticleConfig.empty(params), params) == 0
    c = np.zeros(101, dtype=np.int64)
    c[10] = 50
    assert mass_density(ParticleConfig(c), params) == 0.5


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(-3, 3)), max_size=200), st.data())
def test_suffix_index_matches_naive_sum(ops, data):
    cfg = ParticleConfig(np.zeros(31, dtype=np.int64))
    for x, k in ops:
        k = max(k, -int(cfg.counts[x]))
        cfg.add(x, k)
        q = data.draw(st.integers(0, 30))
        assert suffix_count(cfg, q) == int(cfg.counts[q:].sum())
    assert np.array_equal(suffix_table(cfg), np.cumsum(cfg.counts[::-1])[::-1])


@given(st.lists(st.integers(0, 5), min_size=2, max_size=40))
def test_rightmost_characterisation(counts):
    cfg = ParticleConfig(counts)
    r = rightmost_occupied(cfg)
    if cfg.total == 0:
        assert r is None
    else:
        assert cfg.counts[r] > 0 and not cfg.counts[r + 1:].any()


@given(st.integers(0, 300), st.integers(0, 300))
def test_build_monotone_in_mass(a, b):
    params = LatticeParams(1 / 100, 1.0)
    lo, hi = sorted((a, b))
    c_lo = np.cumsum(build_initial_config(params, N=lo).counts)
    c_hi = np.cumsum(build_initial_config(params, N=hi).counts)
    assert np.all(c_lo <= c_hi)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=60), st.data())
def test_fenwick_find_is_order_statistic(counts, data):
    tree = FenwickTree(counts)
    total = sum(counts)
    if total == 0:
        return
    k = data.draw(st.integers(0, total - 1))
    site = tree.find(k)
    assert sum(counts[:site]) <= k < sum(counts[:site + 1])
    stop = data.draw(st.integers(0, len(counts)))
    assert tree.prefix(stop) == sum(counts[:stop])
