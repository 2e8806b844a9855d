"""Event-driven simulation of independent walkers with current reservoirs.

Particles hop to each neighbour at rate 1/2 (jumps off the lattice are
absent), a particle is created at site 0 at rate eps*j, and one particle is
removed from the rightmost occupied site at rate eps*j whenever the system
is non-empty.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ._jit import jit
from .barriers import F_functional, MeasureU
from .fenwick import fw_add, fw_find
from .lattice import LatticeParams, ParticleConfig
from .profiles import ProfileSpec

HOP, BIRTH, DEATH = 0, 1, 2
EVENT_NAMES = ("hop", "birth", "death")
SPARSE_FRACTION = 0.1
LOG_CHUNK = 1 << 16


@jit
def _advance(counts, tree, clock, totals, rate_j, t_stop, rng, counters,
             log_t, log_kind, log_site, log_to, max_events):
    """Run events until the next one would fall after ``t_stop``.

    ``clock`` is a length-1 array and ``totals`` a length-1 array holding the
    particle number. Events are appended to the log arrays (when they have
    room) and at most ``max_events`` events are applied. Returns the number of
    logged events; the clock is left at ``t_stop`` only when that time was
    reached.
    """
    L = counts.shape[0] - 1
    n_log = 0
    cap = log_t.shape[0]
    done = 0
    while True:
        total = totals[0]
        hop_rate = total - 0.5 * (counts[0] + counts[L])
        death_rate = rate_j if total > 0 else 0.0
        lam = hop_rate + rate_j + death_rate
        u = rng.random()
        wait = -math.log(1.0 - u) / lam
        if clock[0] + wait > t_stop:
            # memorylessness: the clock may stop here and restart later
            clock[0] = t_stop
            return n_log
        clock[0] += wait
        pick = rng.random() * lam
        if pick < hop_rate:
            # half-rate units: one per boundary particle (inward move only),
            # two per interior particle (left, right), in site order
            c0 = counts[0]
            cL = counts[L]
            k = int(rng.random() * 2.0 * hop_rate)
            n_inner = total - c0 - cL
            if k < c0:
                src = 0
                dst = 1
            elif k < c0 + 2 * n_inner:
                q = k - c0
                src = fw_find(tree, c0 + q // 2)
                dst = src - 1 if q % 2 == 0 else src + 1
            else:
                src = L
                dst = L - 1
            counts[src] -= 1
            counts[dst] += 1
            fw_add(tree, src, -1)
            fw_add(tree, dst, 1)
            counters[HOP] += 1
            kind = HOP
            site = src
        elif pick < hop_rate + rate_j:
            counts[0] += 1
            fw_add(tree, 0, 1)
            totals[0] = total + 1
            counters[BIRTH] += 1
            kind = BIRTH
            site = 0
        else:
            site = fw_find(tree, total - 1)
            counts[site] -= 1
            fw_add(tree, site, -1)
            totals[0] = total - 1
            counters[DEATH] += 1
            kind = DEATH
        if log_to and n_log < cap:
            log_t[n_log] = clock[0]
            log_kind[n_log] = kind
            log_site[n_log] = site
            n_log += 1
        done += 1
        if (log_to and n_log == cap) or done == max_events:
            return n_log


@dataclass
class Snapshot:
    """Configuration at one time; sparse (site, count) pairs when occupancy is low."""

    time: float
    total: int
    size: int
    sites: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)
    dense: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def take(cls, clock: float, counts: np.ndarray) -> "Snapshot":
        occupied = np.nonzero(counts)[0]
        total = int(counts.sum())
        if occupied.size < SPARSE_FRACTION * counts.size:
            return cls(clock, total, counts.size - 1, occupied.copy(), counts[occupied].copy())
        return cls(clock, total, counts.size - 1, dense=counts.copy())

    @property
    def sparse(self) -> bool:
        return self.dense is None

    def counts(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense.copy()
        out = np.zeros(self.size + 1, dtype=np.int64)
        out[self.sites] = self.values
        return out

    def suffix(self) -> np.ndarray:
        c = self.counts()
        return np.cumsum(c[::-1])[::-1]

    def config(self) -> ParticleConfig:
        return ParticleConfig(self.counts())


@dataclass
class EventLog:
    time: np.ndarray
    kind: np.ndarray
    site: np.ndarray

    def __len__(self):
        return self.time.size

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("# time: microscopic; site: lattice index (source site for hops)\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "event", "site"])
            for t, k, s in zip(self.time, self.kind, self.site):
                w.writerow([repr(float(t)), EVENT_NAMES[k], int(s)])


class SimState:
    """Configuration, clock, random stream and event counters of one run."""

    def __init__(self, cfg: ParticleConfig, params: LatticeParams, rng: np.random.Generator,
                 log_events: bool = False):
        if cfg.size != params.size:
            raise ValueError(f"config has {cfg.size + 1} sites, params expect {params.size + 1}")
        self.cfg = cfg
        self.params = params
        self.rng = rng
        self._clock = np.zeros(1)
        self._total = np.array([cfg.total], dtype=np.int64)
        self.counters = np.zeros(3, dtype=np.int64)
        self.log_events = log_events
        self._log_parts: List[tuple] = []
        cap = LOG_CHUNK if log_events else 0
        self._buf = (np.empty(cap), np.empty(cap, np.int64), np.empty(cap, np.int64))

    @classmethod
    def seeded(cls, cfg: ParticleConfig, params: LatticeParams, seed, **kw) -> "SimState":
        return cls(cfg, params, np.random.default_rng(seed), **kw)

    @property
    def clock(self) -> float:
        return float(self._clock[0])

    @property
    def births(self) -> int:
        return int(self.counters[BIRTH])

    @property
    def deaths(self) -> int:
        return int(self.counters[DEATH])

    @property
    def jumps(self) -> int:
        return int(self.counters[HOP])

    def _run(self, t_stop: float, max_events: int = -1, buf=None):
        cfg = self.cfg
        rate_j = self.params.eps * self.params.j
        log_to = buf is not None or self.log_events
        self._total[0] = cfg.total
        buf = buf if buf is not None else self._buf
        while True:
            n = _advance(cfg.counts, cfg.tree, self._clock, self._total, rate_j, t_stop, self.rng,
                         self.counters, buf[0], buf[1], buf[2], log_to, max_events)
            if n and self.log_events:
                self._log_parts.append(tuple(b[:n].copy() for b in buf))
            if max_events >= 0 or self._clock[0] >= t_stop:
                cfg.total = int(self._total[0])
                return n

    def step(self) -> dict:
        """Apply exactly one event and return it."""
        buf = (np.empty(1), np.empty(1, np.int64), np.empty(1, np.int64))
        self._run(math.inf, 1, buf)
        return {"time": self.clock, "event": EVENT_NAMES[int(buf[1][0])], "site": int(buf[2][0])}

    def run_until(self, T: float, sample_times: Sequence[float] = ()) -> List[Snapshot]:
        """Advance to time ``T``, recording a snapshot at each sample time.

        A snapshot at the current time is always taken first.
        """
        times = np.asarray(sample_times, dtype=float)
        if times.size and (np.any(np.diff(times) < 0) or times[-1] > T or times[0] < self.clock):
            raise ValueError("sample times must be sorted and lie in [clock, T]")
        start = self.clock
        snaps = [Snapshot.take(start, self.cfg.counts)]
        for t in times:
            if t == start:
                continue
            self._run(float(t))
            snaps.append(Snapshot.take(self.clock, self.cfg.counts))
        if T > self.clock:
            self._run(T)
        return snaps

    def event_log(self) -> EventLog:
        if not self._log_parts:
            return EventLog(np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64))
        return EventLog(*(np.concatenate([p[i] for p in self._log_parts]) for i in range(3)))


def hydrodynamic_gap(snapshot, rho, params: LatticeParams) -> float:
    """max over sites x of |eps * (particles at sites >= x) - F(eps x; rho)|.

    ``rho`` is a ProfileSpec or a MeasureU; ``snapshot`` a Snapshot or a
    ParticleConfig.
    """
    counts = snapshot.counts() if isinstance(snapshot, Snapshot) else snapshot.counts
    if counts.size != params.size + 1:
        raise ValueError("snapshot and params disagree on the lattice size")
    micro = params.eps * np.cumsum(counts[::-1])[::-1]
    r = np.minimum(params.eps * np.arange(counts.size), 1.0)
    if isinstance(rho, ProfileSpec):
        macro = rho.suffix_mass(r)
    elif isinstance(rho, MeasureU):
        macro = F_functional(rho, r)
    else:
        raise TypeError("rho must be a ProfileSpec or a MeasureU")
    return float(np.max(np.abs(micro - macro)))


def write_snapshots_csv(snaps: Sequence[Snapshot], path):
    with open(path, "w", newline="") as fh:
        fh.write("# time: microscopic; x: lattice site; count: particles\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "x", "count"])
        for s in snaps:
            c = s.counts()
            for x in np.nonzero(c)[0]:
                w.writerow([repr(float(s.time)), int(x), int(c[x])])
