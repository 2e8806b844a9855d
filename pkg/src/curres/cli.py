"""Command-line experiment runner.

    curres run <experiment> --config cfg.json [--seed S] [--out DIR]
    curres validate --config cfg.json

Exit codes: 0 all checks passed, 1 some check failed or a computation did not
converge, 2 invalid usage or configuration. Set CURRES_WORKERS to spread
replicas over threads.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import __version__
from ._jit import USE_NUMBA

EXPERIMENTS = ("hydro", "stationary", "converge", "subcritical", "critical", "couple", "masswalk", "kernels")
MIN_REPLICAS = {"hydro": 1, "subcritical": 1, "critical": 100, "couple": 2, "masswalk": 100}

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, problems: List[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class Check:
    name: str
    value: Any
    threshold: Any
    passed: bool
    note: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return f"{tag} {self.name}: value={_fmt(self.value)} threshold={_fmt(self.threshold)}{extra}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


@dataclass
class ExperimentResult:
    experiment: str
    checks: List[Check]
    files: List[Path] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# ---------------------------------------------------------------- config

# field -> (kind, default); kind is one of "pos", "nonneg", "int", "posint",
# "bool", "list", "dict", "str", "any". A default of REQUIRED must be given.
REQUIRED = object()

COMMON = {"seed": ("nonneg_int", 0), "j": ("pos", 1.0)}

SCHEMAS: Dict[str, Dict[str, tuple]] = {
    "hydro": {"eps": ("eps", 1 / 200), "profile": ("dict", {"kind": "linear", "mass": 0.5}),
              "t": ("pos", 0.5), "sample_times": ("list", None), "replicas": ("posint", 20),
              "threshold": ("pos", 0.05)},
    "stationary": {"R": ("pos_or_none", 0.5), "A": ("pos_or_none", None),
                   "ladder": ("list", [1e-2, 3e-3, 1e-3]), "margin_factor": ("pos", 5.0),
                   "tail_tol": ("pos", 1e-9), "threshold": ("pos", 0.05),
                   "edge_threshold": ("pos", 0.1)},
    "converge": {"mass": ("pos", 0.5), "times": ("list", [0.5, 1.0, 2.0, 4.0]), "m": ("posint", 1000),
                 "delta": ("pos", 0.5 / 1024), "threshold": ("pos", 0.02),
                 "squeeze": ("dict", {"t": 0.5, "n_max": 8, "m": 400, "factor": 0.7, "order_tol": 1e-10}),
                 "manifold": ("dict", {"masses": [0.25, 1.0, 2.0], "t": 1.0, "tol": 5e-3, "m": 400,
                                       "threshold": 0.01})},
    "subcritical": {"eps": ("eps", 1 / 50), "m": ("pos", 1.0), "t": ("pos", 1.0),
                    "time_exponent": ("pos", 0.5), "replicas": ("posint", 20), "threshold": ("pos", 0.07)},
    "critical": {"eps": ("eps", 1 / 50), "m": ("pos", 1.0), "t": ("pos", 1.0), "replicas": ("posint", 200),
                 "source": ("str", "walk"), "variance_factor": ("pos", 1.0), "threshold": ("pos", 0.1)},
    "couple": {"eps": ("eps", 1 / 100), "n": ("posint", 50), "m": ("nonneg_int", 0),
               "x_profile": ("dict", {"kind": "linear", "mass": 0.5}),
               "y_profile": ("dict", {"kind": "uniform", "mass": 0.5}),
               "times": ("list", [0.5, 1.0, 2.0]), "replicas": ("posint", 100),
               "ratio_per_unit": ("pos", 0.8)},
    "masswalk": {"eps": ("eps", 1 / 50), "profile": ("dict", {"kind": "linear", "mass": 0.5}),
                 "t": ("pos", 1.0), "replicas": ("posint", 500), "threshold": ("pos", 0.08),
                 "calibrate": ("bool", False), "meta_replicas": ("posint", 200)},
    "kernels": {"m": ("posint", 400), "semigroup_m": ("posint", 400),
                "semigroup_times": ("list", [1e-3, 0.01, 0.05, 0.1, 1.0]),
                "compare_times": ("list", [1e-3, 1e-2, 0.1, 0.5, 1.0, 10.0]),
                "resolvent_R": ("pos", 0.5), "resolvent_r": ("list", [0.0, 0.25, 0.45]),
                "row_tol": ("pos", 1e-8), "series_tol": ("pos", 1e-8), "semigroup_tol": ("pos", 1e-6),
                "resolvent_tol": ("pos", 1e-3)},
}


def _check_field(name, kind, value, problems):
    def bad(msg):
        problems.append(f"{name}: {msg} (got {value!r})")

    if kind in ("pos", "pos_or_none"):
        if value is None and kind == "pos_or_none":
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0 or not math.isfinite(value):
            return bad("must be a positive number")
        return float(value)
    if kind == "eps":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            return bad("must be a positive number")
        inv = 1.0 / value
        if abs(inv - round(inv)) > 1e-9 * inv or round(inv) < 2:
            return bad("1/eps must be an integer >= 2")
        return 1.0 / round(inv)
    if kind in ("posint", "nonneg_int"):
        if isinstance(value, bool) or not isinstance(value, int):
            return bad("must be an integer")
        if value < (1 if kind == "posint" else 0):
            return bad("must be positive" if kind == "posint" else "must be non-negative")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            return bad("must be true or false")
        return value
    if kind == "list":
        if value is None:
            return None
        if not isinstance(value, list) or not value or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return bad("must be a non-empty list of numbers")
        return [float(v) for v in value]
    if kind == "dict":
        if not isinstance(value, dict):
            return bad("must be an object")
        return value
    if kind == "str":
        if not isinstance(value, str):
            return bad("must be a string")
        return value
    return value


def validate_config(raw: Dict[str, Any], experiment: Optional[str] = None):
    """Typed config with defaults filled, plus notes; raises ConfigError."""
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be a JSON object"])
    problems: List[str] = []
    notes: List[str] = []
    exp = experiment or raw.get("experiment")
    if raw.get("experiment") not in (None, exp):
        problems.append(f"experiment: config says {raw.get('experiment')!r}, command line says {exp!r}")
    if exp not in EXPERIMENTS:
        raise ConfigError([f"experiment: must be one of {', '.join(EXPERIMENTS)} (got {exp!r})"])
    schema = {**COMMON, **SCHEMAS[exp]}
    unknown = sorted(set(raw) - set(schema) - {"experiment", "out"})
    problems += [f"{k}: unknown field for experiment {exp}" for k in unknown]
    cfg: Dict[str, Any] = {"experiment": exp}
    for name, (kind, default) in schema.items():
        if name in raw:
            cfg[name] = _check_field(name, kind, raw[name], problems)
        else:
            cfg[name] = default
            if name == "seed":
                notes.append("seed not given; default seed 0 used")
    if exp in MIN_REPLICAS and isinstance(cfg.get("replicas"), int) and cfg["replicas"] < MIN_REPLICAS[exp]:
        problems.append(f"replicas: experiment {exp} needs at least {MIN_REPLICAS[exp]} (got {cfg['replicas']})")
    if exp == "stationary" and not problems:
        if "A" in raw and raw["A"] is not None:
            if "R" in raw and raw["R"] is not None:
                problems.append("R/A: give exactly one of R or A")
            cfg["R"] = None
        elif cfg["R"] is None:
            problems.append("R/A: give exactly one of R or A")
        elif not cfg["R"] < 1:
            problems.append("R: must be < 1 (nothing escapes at R = 1)")
    if exp == "converge" and not problems:
        m, delta = cfg["m"], cfg["delta"]
        if math.sqrt(delta) < 2.0 / m:
            new_m = int(math.ceil(2.0 / math.sqrt(delta)))
            warnings.warn(f"sqrt(delta) < 2/m; grid refined from m={m} to m={new_m}", RuntimeWarning, stacklevel=2)
            notes.append(f"m auto-refined from {m} to {new_m} to resolve sqrt(delta)")
            cfg["m"] = new_m
        for t in cfg["times"]:
            if abs(t / delta - round(t / delta)) > 1e-9 * t / delta:
                problems.append(f"times: {t} is not a multiple of delta={delta}")
    if exp == "critical" and cfg.get("source") not in ("walk", "sim"):
        problems.append(f"source: must be 'walk' or 'sim' (got {cfg.get('source')!r})")
    for key in ("profile", "x_profile", "y_profile"):
        if key in cfg and isinstance(cfg[key], dict):
            try:
                _profile(cfg[key], cfg.get("j", 1.0))
            except (ValueError, KeyError, TypeError) as exc:
                problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    return cfg, notes


def _profile(obj, j):
    from .profiles import ProfileSpec
    return ProfileSpec.from_json(obj, j=j)


# ---------------------------------------------------------------- output

def _csv(path: Path, header: List[str], rows, units: str):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {units}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _versions() -> Dict[str, str]:
    import scipy
    out = {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
           "curres": __version__, "numba_enabled": str(USE_NUMBA)}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        pass
    return out


# ---------------------------------------------------------------- experiments

def _exp_kernels(cfg, out: Path) -> ExperimentResult:
    from .kernels import (Grid, KernelCache, _neumann_cosine, _neumann_images, apply_kernel,
                          dirichlet_resolvent_origin, semigroup_defect)
    from .barriers import MeasureU
    checks, rows = [], []
    grid = Grid(cfg["m"])
    worst_row = 0.0
    for t in cfg["compare_times"]:
        c = KernelCache.neumann(grid, t)
        worst_row = max(worst_row, float(np.max(np.abs(c.matrix.sum(axis=0) - 1.0))))
    checks.append(Check("neumann column-mass conservation", worst_row, cfg["row_tol"], worst_row <= cfg["row_tol"]))
    pts = np.linspace(0.0, 1.0, 10)
    worst_series = 0.0
    for t in np.geomspace(1e-3, 10.0, 13):
        a = _neumann_images(t, pts[:, None], pts[None, :])
        b = _neumann_cosine(t, pts[:, None], pts[None, :])
        err = float(np.max(np.abs(a - b)))
        worst_series = max(worst_series, err)
        rows.append(["images_vs_series", t, err])
    checks.append(Check("image sum vs cosine series", worst_series, cfg["series_tol"],
                        worst_series <= cfg["series_tol"]))
    pts = np.linspace(0.0, 1.0, 21)
    worst_sg = 0.0
    for t in cfg["semigroup_times"]:
        err = semigroup_defect(t, pts)
        worst_sg = max(worst_sg, err)
        rows.append(["semigroup_pointwise", t, err])
    checks.append(Check("semigroup defect", worst_sg, cfg["semigroup_tol"], worst_sg <= cfg["semigroup_tol"]))
    # the same identity for the cell-averaged operator carries an O(h^2) projection error
    sg = Grid(cfg["semigroup_m"])
    r = sg.midpoints
    u = MeasureU(0.0, 1.0 + 0.5 * np.cos(np.pi * r) + 0.25 * np.cos(3 * np.pi * r))
    for t in cfg["semigroup_times"]:
        one = KernelCache.neumann(sg, t)
        twice = apply_kernel(one, MeasureU(0.0, apply_kernel(one, u)))
        err = float(np.max(np.abs(twice - apply_kernel(KernelCache.neumann(sg, 2 * t), u))))
        rows.append([f"semigroup_cells_m{sg.m}", t, err])
    R = cfg["resolvent_R"]
    worst_res = 0.0
    for rr in cfg["resolvent_r"]:
        err = abs(dirichlet_resolvent_origin(R, rr) - (R - abs(rr)))
        worst_res = max(worst_res, err)
        rows.append(["resolvent", rr, err])
    checks.append(Check("dirichlet resolvent vs R-|r|", worst_res, cfg["resolvent_tol"],
                        worst_res <= cfg["resolvent_tol"]))
    f = _csv(out / "kernels.csv", ["check", "parameter", "error"], rows, "parameter: time t or point r; error: sup norm")
    return ExperimentResult("kernels", checks, [f])


def _exp_stationary(cfg, out: Path) -> ExperimentResult:
    from .stationary import linear_limit_check
    rep = linear_limit_check(cfg["j"], R=cfg["R"], A=cfg["A"], ladder=cfg["ladder"],
                             margin_factor=cfg["margin_factor"], tail_tol=cfg["tail_tol"])
    profile_csv = out / "stationary_profiles.csv"
    rep.write_csv(profile_csv)
    rows = [[r.delta, r.margin, r.sup_error, r.edge_value, r.result.iterations, r.result.fixed_point_residual()]
            for r in rep.rows]
    summary = _csv(out / "stationary_ladder.csv",
                   ["delta", "margin", "sup_error", "edge_value", "terms", "fixed_point_residual"], rows,
                   "delta, margin: macroscopic; sup_error, edge_value: mass per unit length")
    checks = [Check("ladder errors decrease", rep.errors, "decreasing", rep.non_increasing()),
              Check("final sup error", rep.errors[-1], cfg["threshold"], rep.errors[-1] <= cfg["threshold"])]
    if cfg["A"] is not None:
        last = rep.rows[-1]
        dev = abs(last.edge_value - last.edge_target)
        checks.append(Check("edge value vs j/A", dev, cfg["edge_threshold"], dev <= cfg["edge_threshold"]))
    return ExperimentResult("stationary", checks, [profile_csv, summary])


def _exp_converge(cfg, out: Path) -> ExperimentResult:
    from .barriers import (MeasureU, fixed_step_element, linear_profile, run_barriers, separating_element,
                           sup_F_distance, order_slack)
    from .kernels import Grid
    from .profiles import ProfileSpec
    j = cfg["j"]
    checks, files = [], []
    # distance to the linear profile along time, one common step for all times
    grid = Grid(cfg["m"])
    u0 = MeasureU(0.0, np.full(grid.m, cfg["mass"]))
    target = ProfileSpec.linear(cfg["mass"], j)
    rows, dists = [], []
    for t in cfg["times"]:
        pair = fixed_step_element(u0, t, cfg["delta"], j)
        rep = MeasureU(0.0, pair.balanced())
        d = sup_F_distance(rep, target)
        dists.append(d)
        rows.append([t, cfg["delta"], d, pair.gap, min(order_slack(pair.lower, rep), order_slack(rep, pair.upper))])
    files.append(_csv(out / "converge_distance.csv", ["t", "delta", "distance", "barrier_gap", "sandwich_slack"],
                      rows, "t, delta: macroscopic time; distance, gap, slack: mass"))
    strictly = all(b < a for a, b in zip(dists, dists[1:]))
    checks.append(Check("distance strictly decreasing in t", dists, "strict", strictly))
    checks.append(Check("distance at last time", dists[-1], cfg["threshold"], dists[-1] <= cfg["threshold"]))
    sq = cfg["squeeze"]
    if sq:
        g = Grid(int(sq.get("m", 400)))
        u = MeasureU(0.0, np.full(g.m, cfg["mass"]))
        gaps, slack, srows = [], math.inf, []
        for n in range(1, int(sq.get("n_max", 8)) + 1):
            pair = run_barriers(u, float(sq.get("t", 0.5)), n, j, check_order=True)
            gaps.append(pair.gap)
            slack = min(slack, pair.min_order_slack)
            srows.append([n, pair.delta, pair.gap, pair.min_order_slack])
        files.append(_csv(out / "converge_squeeze.csv", ["n", "delta", "gap", "min_order_slack"], srows,
                          "delta: macroscopic time; gap, slack: mass"))
        ratios = [b / a for a, b in zip(gaps, gaps[1:])]
        factor = float(sq.get("factor", 0.7))
        checks.append(Check("barrier gap ratio per doubling", max(ratios), factor, max(ratios) <= factor))
        tol = float(sq.get("order_tol", 1e-10))
        checks.append(Check("sandwich ordering at every step", slack, -tol, slack >= -tol))
    mf = cfg["manifold"]
    if mf:
        g = Grid(int(mf.get("m", 400)))
        mrows, worst = [], 0.0
        for M in mf.get("masses", []):
            sep = separating_element(linear_profile(M, j, g), float(mf.get("t", 1.0)), j, tol=float(mf.get("tol", 5e-3)))
            d = sup_F_distance(sep.measure, ProfileSpec.linear(M, j))
            worst = max(worst, d)
            mrows.append([M, sep.n, sep.gap, d])
        files.append(_csv(out / "converge_manifold.csv", ["mass", "n", "barrier_gap", "distance"], mrows,
                          "mass, gap, distance: mass"))
        thr = float(mf.get("threshold", 0.01))
        checks.append(Check("linear profiles stationary", worst, thr, worst <= thr))
    return ExperimentResult("converge", checks, files)


def _hydro_runs(eps, j, spec, T_micro, sample_times, replicas, seed):
    from .lattice import LatticeParams, build_initial_config
    from .replicas import run_replicas
    from .sim import SimState, hydrodynamic_gap
    from .profiles import ProfileSpec
    params = LatticeParams(eps, j)
    cfg0 = build_initial_config(params, spec)

    def one(i, rng):
        st = SimState(cfg0.copy(), params, rng)
        snaps = st.run_until(T_micro, sample_times)
        out = []
        for s in snaps[1:] if len(snaps) > 1 else snaps:
            mass_now = eps * s.total
            out.append((i, s.time, hydrodynamic_gap(s, spec, params), mass_now,
                        hydrodynamic_gap(s, ProfileSpec.linear(mass_now, j), params)))
        return out

    return params, cfg0, run_replicas(one, replicas, seed)


def _exp_hydro(cfg, out: Path) -> ExperimentResult:
    eps, j = cfg["eps"], cfg["j"]
    spec = _profile(cfg["profile"], j)
    T = cfg["t"] / eps ** 2
    times = sorted(set([s / eps ** 2 for s in (cfg["sample_times"] or [])] + [T]))
    _, _, runs = _hydro_runs(eps, j, spec, T, times, cfg["replicas"], cfg["seed"])
    rows = [r for rr in runs for r in rr]
    f = _csv(out / "hydro_gaps.csv", ["replica", "time", "gap", "mass", "gap_vs_current_mass"], rows,
             "time: microscopic; gap: sup over sites of |eps F_eps - F|; mass: eps * particles")
    worst = [max(r[2] for r in rr) for rr in runs]
    mean = float(np.mean(worst))
    diag = float(np.mean([max(r[4] for r in rr) for rr in runs]))
    return ExperimentResult("hydro", [Check("mean over replicas of the max gap over sampled times", mean, cfg["threshold"],
                                            mean <= cfg["threshold"],
                                            f"vs linear profile of the current mass: {diag:.4g}")], [f])


def _exp_subcritical(cfg, out: Path) -> ExperimentResult:
    from .profiles import ProfileSpec
    eps, j = cfg["eps"], cfg["j"]
    spec = ProfileSpec.linear(cfg["m"], j)
    t_eps = eps ** (-cfg["time_exponent"]) * cfg["t"]
    T = t_eps / eps ** 2
    _, _, runs = _hydro_runs(eps, j, spec, T, [T], cfg["replicas"], cfg["seed"])
    rows = [r for rr in runs for r in rr]
    f = _csv(out / "subcritical_gaps.csv", ["replica", "time", "gap", "mass", "gap_vs_current_mass"], rows,
             "time: microscopic; gap: sup over sites of |eps F_eps - F|; mass: eps * particles")
    mean = float(np.mean([rr[-1][2] for rr in runs]))
    diag = float(np.mean([rr[-1][4] for rr in runs]))
    return ExperimentResult("subcritical", [Check("mean gap vs linear profile of the initial mass", mean,
                                                  cfg["threshold"], mean <= cfg["threshold"],
                                                  f"vs linear profile of the current mass: {diag:.4g}")], [f])


def _critical_samples(cfg):
    from .lattice import LatticeParams, build_initial_config
    from .mass import mass_walk_path
    from .profiles import ProfileSpec
    from .replicas import run_replicas
    from .sim import SimState
    eps, j = cfg["eps"], cfg["j"]
    params = LatticeParams(eps, j)
    cfg0 = build_initial_config(params, ProfileSpec.linear(cfg["m"], j))
    T = cfg["t"] / eps ** 3
    if cfg["source"] == "walk":
        vals = run_replicas(lambda i, r: int(mass_walk_path(cfg0.total, eps, j, [T], r)[0].values[0]),
                            cfg["replicas"], cfg["seed"])
    else:
        def one(i, r):
            st = SimState(cfg0.copy(), params, r)
            st.run_until(T)
            return st.cfg.total
        vals = run_replicas(one, cfg["replicas"], cfg["seed"])
    return eps * np.asarray(vals, dtype=float), eps * cfg0.total


def _exp_critical(cfg, out: Path) -> ExperimentResult:
    from .mass import supercritical_mass_test, write_samples_csv
    samples, start = _critical_samples(cfg)
    f = out / "critical_samples.csv"
    write_samples_csv(samples, f)
    var = cfg["variance_factor"] * cfg["j"] * cfg["t"]
    rep = supercritical_mass_test(samples, start, cfg["j"], cfg["t"], threshold=cfg["threshold"], variance=var)
    alt = supercritical_mass_test(samples, start, cfg["j"], cfg["t"], variance=2.0 * cfg["j"] * cfg["t"])
    rf = out / "critical_report.json"
    rf.write_text(json.dumps({"test": json.loads(rep.to_json()), "walk_variance_2jt": json.loads(alt.to_json())},
                             sort_keys=True, indent=1) + "\n")
    return ExperimentResult("critical", [Check(f"KS vs reflected Gaussian (variance {var:g})", rep.statistic,
                                               cfg["threshold"], bool(rep.verdict),
                                               f"variance 2jt gives {alt.statistic:.4g}")], [f, rf])


def _exp_couple(cfg, out: Path) -> ExperimentResult:
    from .coupling import LabeledPair, initial_positions, trace_pair
    from .lattice import LatticeParams, build_initial_config
    from .replicas import run_replicas
    eps, j, n, m = cfg["eps"], cfg["j"], cfg["n"], cfg["m"]
    params = LatticeParams(eps, j)
    x0 = initial_positions(build_initial_config(params, _profile(cfg["x_profile"], j)).counts)
    y0 = initial_positions(build_initial_config(params, _profile(cfg["y_profile"], j)).counts)
    if x0.size < n or y0.size < n + m:
        raise ConfigError([f"profiles give {x0.size} and {y0.size} particles; need {n} and {n + m}"])
    # keep n (resp. n + m) particles spread over the whole profile
    x0 = x0[np.linspace(0, x0.size - 1, n).round().astype(int)]
    y0 = y0[np.linspace(0, y0.size - 1, n + m).round().astype(int)]
    times = np.r_[0.0, np.asarray(cfg["times"]) / eps ** 2]

    def one(i, rng):
        return trace_pair(LabeledPair(x0, y0, params, rng), times)

    traces = run_replicas(one, cfg["replicas"], cfg["seed"])
    D = np.array([tr.discrepancies for tr in traces])
    L1 = np.array([tr.l1 for tr in traces])
    rows = [[i, float(times[k] * eps ** 2), int(D[i, k]), int(L1[i, k])]
            for i in range(len(traces)) for k in range(times.size)]
    f = _csv(out / "couple_traces.csv", ["replica", "macro_time", "discrepancies", "l1"], rows,
             "macro_time: eps^2 * microscopic time; discrepancies, l1: particle counts")
    mean = D.mean(axis=0)
    checks = []
    ok, worst = True, 0.0
    macro = times * eps ** 2
    for k in range(2, times.size):
        a, b = mean[k - 1], mean[k]
        if a > 0:
            ratio = (b / a) ** (1.0 / (macro[k] - macro[k - 1]))
            worst = max(worst, ratio)
            ok &= b < a and ratio <= cfg["ratio_per_unit"]
        else:
            ok &= b == 0
    checks.append(Check("mean discrepancies decay", [float(v) for v in mean[1:]],
                        f"ratio <= {cfg['ratio_per_unit']} per unit time", bool(ok), f"worst ratio {worst:.4g}"))
    bound_lit = bool(np.all(L1 <= D + m))
    bound_two = bool(np.all(L1 <= 2 * D + m))
    viol = int(np.sum(L1 > D + m))
    checks.append(Check("L1 <= discrepancies + m at every sampled time", viol, 0, bound_lit,
                        f"L1 <= 2*discrepancies + m holds: {bound_two}"))
    return ExperimentResult("couple", checks, [f])


def _exp_masswalk(cfg, out: Path) -> ExperimentResult:
    from scipy import stats
    from .lattice import LatticeParams, build_initial_config
    from .mass import folded_normal_cdf, mass_walk_path
    from .replicas import run_replicas
    from .sim import SimState
    eps, j = cfg["eps"], cfg["j"]
    params = LatticeParams(eps, j)
    cfg0 = build_initial_config(params, _profile(cfg["profile"], j))
    T = cfg["t"] / eps ** 2
    N = cfg["replicas"]

    def full(i, rng):
        st = SimState(cfg0.copy(), params, rng)
        st.run_until(T)
        return st.cfg.total

    def walk(i, rng):
        return int(mass_walk_path(cfg0.total, eps, j, [T], rng)[0].values[0])

    seq = np.random.SeedSequence(cfg["seed"]).spawn(2)
    a = np.array(run_replicas(full, N, int(seq[0].generate_state(1)[0])))
    b = np.array(run_replicas(walk, N, int(seq[1].generate_state(1)[0])))
    ks = float(stats.ks_2samp(a, b).statistic)
    f = _csv(out / "masswalk_samples.csv", ["replica", "simulator", "walk"], [[i, int(x), int(y)] for i, (x, y) in
                                                                               enumerate(zip(a, b))],
             "simulator, walk: particle number at the horizon")
    checks = [Check("two-sample KS simulator vs walk", ks, cfg["threshold"], ks <= cfg["threshold"])]
    if cfg["calibrate"]:
        rng = np.random.default_rng(seq[1].spawn(1)[0])
        crit = 1.36 / math.sqrt(N)
        hits = 0
        for _ in range(cfg["meta_replicas"]):
            x = np.abs(1.0 + rng.standard_normal(N))
            hits += stats.kstest(x, lambda v: folded_normal_cdf(v, 1.0, 1.0)).statistic < crit
        freq = hits / cfg["meta_replicas"]
        checks.append(Check("KS null calibration frequency", freq, 0.95, freq >= 0.95 - 2 * math.sqrt(0.05 * 0.95 / cfg["meta_replicas"]),
                            "binomial slack of two standard errors"))
    return ExperimentResult("masswalk", checks, [f])


RUNNERS: Dict[str, Callable] = {
    "kernels": _exp_kernels, "stationary": _exp_stationary, "converge": _exp_converge, "hydro": _exp_hydro,
    "subcritical": _exp_subcritical, "critical": _exp_critical, "couple": _exp_couple, "masswalk": _exp_masswalk,
}


def run_experiment(cfg: Dict[str, Any], out_dir, notes: Optional[List[str]] = None) -> ExperimentResult:
    """Run a validated config, write CSVs and ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    result = RUNNERS[cfg["experiment"]](cfg, out)
    result.notes = list(notes or [])
    manifest = {
        "experiment": cfg["experiment"],
        "config": cfg,
        "seed": cfg["seed"],
        "notes": result.notes,
        "versions": _versions(),
        "wall_clock_seconds": round(time.time() - started, 3),
        "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "checks": [{"name": c.name, "value": c.value, "threshold": c.threshold, "passed": c.passed, "note": c.note}
                   for c in result.checks],
        "passed": result.passed,
        "files": {p.name: _sha256(p) for p in result.files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True, default=_json_default) + "\n")
    return result


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


def _load(path) -> Dict[str, Any]:
    with open(path) as fh:
        return json.load(fh)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="curres", description="Current-reservoir walker experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", default=None)
    val = sub.add_parser("validate", help="check a config and print it with defaults filled")
    val.add_argument("--config", required=True)
    val.add_argument("--experiment", choices=EXPERIMENTS)
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        raw = _load(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    exp = getattr(args, "experiment", None)
    try:
        if args.command == "run" and args.seed is not None:
            raw = {**raw, "seed": args.seed}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg, notes = validate_config(raw, exp)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "validate":
        print(json.dumps(cfg, indent=1, sort_keys=True))
        for n in notes:
            print(f"note: {n}", file=sys.stderr)
        return EXIT_PASS
    out = Path(args.out or raw.get("out") or f"out_{cfg['experiment']}")
    try:
        result = run_experiment(cfg, out, notes)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # numerical failures carry their residual in the message
        from .barriers import ConvergenceError
        from .stationary import SeriesConvergenceError
        if isinstance(exc, (ConvergenceError, SeriesConvergenceError)):
            print(f"FAIL non-convergence: {exc}", file=sys.stderr)
            return EXIT_FAIL
        raise
    for c in result.checks:
        print(c.line())
    print(f"{'PASS' if result.passed else 'FAIL'} {cfg['experiment']} -> {out}")
    return EXIT_PASS if result.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
