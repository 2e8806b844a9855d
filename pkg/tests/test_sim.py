import numpy as np
import pytest
from scipy import stats

from curres.lattice import LatticeParams, ParticleConfig, build_initial_config
from curres.profiles import ProfileSpec
from curres.sim import SimState, Snapshot, hydrodynamic_gap, write_snapshots_csv

P = LatticeParams(1 / 20, 1.0)


def at(*sites):
    c = np.zeros(P.size + 1, dtype=np.int64)
    for s in sites:
        c[s] += 1
    return ParticleConfig(c)


def test_empty_config_births_first():
    st = SimState.seeded(ParticleConfig.empty(P), P, 3)
    ev = st.step()
    assert ev["event"] == "birth" and st.cfg.counts[0] == 1 and st.cfg.total == 1


def test_death_hits_rightmost():
    rng = np.random.default_rng(0)
    seen = 0
    for _ in range(3000):
        st = SimState(at(2, 9), P, rng)
        ev = st.step()
        if ev["event"] == "death":
            seen += 1
            assert st.cfg.counts[9] == 0 and st.cfg.counts[2] == 1
    assert seen > 0


def test_interior_hop_is_fair():
    rng = np.random.default_rng(1)
    left = right = 0
    for _ in range(6000):
        st = SimState(at(10), P, rng)
        ev = st.step()
        if ev["event"] == "hop":
            if st.cfg.counts[9]:
                left += 1
            else:
                right += 1
    assert stats.binomtest(left, left + right, 0.5).pvalue > 0.01


def test_boundary_particles_move_inward():
    rng = np.random.default_rng(2)
    for site, inward in ((0, 1), (P.size, P.size - 1)):
        for _ in range(300):
            st = SimState(at(site), P, rng)
            ev = st.step()
            if ev["event"] == "hop":
                assert st.cfg.counts[inward] == 1 and st.cfg.total == 1


def test_run_until_zero_gives_initial_only():
    cfg = build_initial_config(P, ProfileSpec.linear(0.5, 1.0))
    snaps = SimState.seeded(cfg.copy(), P, 0).run_until(0.0)
    assert len(snaps) == 1 and np.array_equal(snaps[0].counts(), cfg.counts)


def test_same_seed_same_events():
    cfg = build_initial_config(P, ProfileSpec.linear(0.5, 1.0))
    logs = []
    for _ in range(2):
        st = SimState.seeded(cfg.copy(), P, 42, log_events=True)
        st.run_until(200.0)
        logs.append(st.event_log())
    assert len(logs[0]) > 100
    for a, b in zip((logs[0].time, logs[0].kind, logs[0].site), (logs[1].time, logs[1].kind, logs[1].site)):
        assert np.array_equal(a, b)


def test_bookkeeping_and_range():
    cfg = build_initial_config(P, ProfileSpec.linear(0.5, 1.0))
    st = SimState.seeded(cfg.copy(), P, 7)
    snaps = st.run_until(2000.0, np.linspace(0, 2000.0, 21))
    assert st.births - st.deaths == st.cfg.total - cfg.total
    for s in snaps:
        assert s.counts().min() >= 0 and s.counts().size == P.size + 1


def test_restart_keeps_state_consistent():
    cfg = build_initial_config(P, ProfileSpec.linear(0.5, 1.0))
    st = SimState.seeded(cfg.copy(), P, 5)
    st.run_until(100.0)
    st.run_until(300.0)
    assert st.clock == 300.0 and st.cfg.total == st.cfg.counts.sum()


def test_birth_rate_bookkeeping():
    params = LatticeParams(1 / 10, 1.0)
    cfg = build_initial_config(params, ProfileSpec.linear(0.5, 1.0))
    st = SimState.seeded(cfg, params, 11)
    T = 2e5
    st.run_until(T)
    rate = params.eps * params.j
    assert abs(st.births - rate * T) < 3 * np.sqrt(rate * T)


def test_gap_examples():
    params = LatticeParams(1 / 200, 1.0)
    spec = ProfileSpec.linear(0.5, 1.0)
    cfg = build_initial_config(params, spec)
    assert hydrodynamic_gap(cfg, spec, params) <= params.eps * (1 + 1e-9)
    empty = ParticleConfig.empty(params)
    assert hydrodynamic_gap(empty, ProfileSpec.uniform(0.0), params) == 0.0
    snap = Snapshot.take(0.0, cfg.counts)
    assert hydrodynamic_gap(snap, spec, params) == hydrodynamic_gap(cfg, spec, params)


def test_snapshot_sparse_roundtrip(tmp_path):
    c = np.zeros(1001, dtype=np.int64)
    c[[3, 500]] = [2, 1]
    s = Snapshot.take(1.5, c)
    assert s.sparse and np.array_equal(s.counts(), c)
    write_snapshots_csv([s], tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("#") and lines[1] == "time,x,count" and len(lines) == 4


def test_backwards_sample_times_rejected():
    st = SimState.seeded(at(3), P, 0)
    with pytest.raises(ValueError):
        st.run_until(10.0, [5.0, 2.0])
