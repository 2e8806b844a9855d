import json
import os
import subprocess
import sys

PROBE = r"""
import json
import numpy as np
from curres import USE_NUMBA
from curres.coupling import LabeledPair, initial_positions
from curres.fenwick import fw_build, fw_find
from curres.lattice import LatticeParams, build_initial_config
from curres.mass import mass_walk_path
from curres.profiles import ProfileSpec
from curres.sim import SimState

P = LatticeParams(1 / 40, 1.0)
cfg = build_initial_config(P, ProfileSpec.linear(0.5, 1.0))
st = SimState.seeded(cfg.copy(), P, 123, log_events=True)
st.run_until(500.0)
log = st.event_log()
x = initial_positions(cfg.counts)
y = initial_positions(build_initial_config(P, ProfileSpec.uniform(0.5)).counts)
pair = LabeledPair.seeded(x, y, P, 321).run_until(800.0)
path, tallies = mass_walk_path(5, 0.02, 1.0, np.linspace(0, 3000, 7), np.random.default_rng(9))
tree = fw_build(cfg.counts)
print(json.dumps({
    "numba": USE_NUMBA,
    "counts": st.cfg.counts.tolist(),
    "log_t": log.time.tolist(), "log_kind": log.kind.tolist(), "log_site": log.site.tolist(),
    "pair_x": pair.x_counts().tolist(), "pair_y": pair.y_counts().tolist(), "pair_ev": pair.counters.tolist(),
    "walk": path.values.tolist(), "tallies": tallies.tolist(),
    "find": [int(fw_find(tree, k)) for k in range(cfg.total)],
}))
"""


def probe(disable):
    env = dict(os.environ)
    env.pop("CURRES_DISABLE_NUMBA", None)
    if disable:
        env["CURRES_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_numba_and_fallback_agree_exactly():
    fast, slow = probe(False), probe(True)
    assert slow["numba"] is False
    for key in fast:
        if key != "numba":
            assert fast[key] == slow[key], key
