"""Event throughput of the jitted kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--events N]

Each path runs in its own interpreter, because CURRES_DISABLE_NUMBA is read
at import time.
"""
import argparse
import json
import os
import subprocess
import sys

BODY = r"""
import json, sys, time
import numpy as np
from curres import USE_NUMBA
from curres.coupling import LabeledPair, initial_positions
from curres.lattice import LatticeParams, build_initial_config
from curres.mass import mass_walk_path
from curres.profiles import ProfileSpec
from curres.sim import SimState

n = int(sys.argv[1])
P = LatticeParams(1 / 200, 1.0)
cfg = build_initial_config(P, ProfileSpec.linear(0.5, 1.0))
x = initial_positions(cfg.counts)
y = initial_positions(build_initial_config(P, ProfileSpec.uniform(0.5)).counts)

def timed(fn):
    fn(10)  # compile / warm up
    t0 = time.perf_counter()
    events = fn(n)
    return events / (time.perf_counter() - t0)

def sim(k):
    st = SimState.seeded(cfg.copy(), P, 0)
    st._run(np.inf, k)
    return int(st.counters.sum())

def couple(k):
    p = LabeledPair.seeded(x, y, P, 0)
    p._run(np.inf, k)
    return int(p.counters.sum())

def walk(k):
    T = k / (2 * 0.005)
    _, tallies = mass_walk_path(100, 0.005, 1.0, [T], np.random.default_rng(0))
    return int(tallies[0])

print(json.dumps({"numba": USE_NUMBA, "sim": timed(sim), "couple": timed(couple), "walk": timed(walk)}))
"""


def run(disable: bool, events: int) -> dict:
    env = dict(os.environ)
    env.pop("CURRES_DISABLE_NUMBA", None)
    if disable:
        env["CURRES_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", BODY, str(events)], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--events", type=int, default=200_000)
    args = ap.parse_args()
    fast = run(False, args.events)
    slow = run(True, max(args.events // 50, 1000))
    print(f"{'kernel':8s} {'numba ev/s':>14s} {'numpy ev/s':>14s} {'speedup':>9s}")
    for k in ("sim", "couple", "walk"):
        print(f"{k:8s} {fast[k]:14.3e} {slow[k]:14.3e} {fast[k] / slow[k]:9.1f}")


if __name__ == "__main__":
    main()
