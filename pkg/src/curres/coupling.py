"""Coupled pair of labeled systems that share births, deaths and matched moves.

A label i in I carries a position x_i in the first system; a label in J
carries y_i in the second; I is a subset of J. Labels with x_i = y_i move
together, all others move independently. Creations add the same new label at
site 0 in both systems; deaths remove the rightmost particle (largest label
among ties) from each system and then relabel so that discrepancies can
only disappear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ._jit import jit
from .lattice import LatticeParams

NULL, MOVE_X, MOVE_Y, MOVE_BOTH, CREATE, DEATH = range(6)
EVENT_NAMES = ("null", "move_x", "move_y", "move_both", "create", "death")
NEED_ROOM = -1


@jit
def _jlist_remove(jlist, jidx, jcount, label):
    pos = jidx[label]
    last = jlist[jcount[0] - 1]
    jlist[pos] = last
    jidx[last] = pos
    jidx[label] = -1
    jcount[0] -= 1


@jit
def _death(xpos, ypos, in_i, jlist, jidx, jcount):
    # rightmost particle, largest label among ties, in each system
    i = -1
    j = -1
    for k in range(jcount[0]):
        lab = jlist[k]
        if in_i[lab] and (i < 0 or xpos[lab] > xpos[i] or (xpos[lab] == xpos[i] and lab > i)):
            i = lab
        if j < 0 or ypos[lab] > ypos[j] or (ypos[lab] == ypos[j] and lab > j):
            j = lab
    j_in_i = in_i[j]
    if i >= 0:
        in_i[i] = False
    if i == j or not j_in_i:
        # plain erasure; a label left with only y moves to J \ I
        if i >= 0:
            xpos[i] = -1
        ypos[j] = -1
        _jlist_remove(jlist, jidx, jcount, j)
        return j
    # i != j and j in I: the survivors x_j and y_i are merged under one label
    if xpos[j] <= ypos[i]:
        ypos[j] = ypos[i]
        xpos[i] = -1
        ypos[i] = -1
        _jlist_remove(jlist, jidx, jcount, i)
    else:
        xpos[i] = xpos[j]
        in_i[i] = True
        xpos[j] = -1
        ypos[j] = -1
        in_i[j] = False
        _jlist_remove(jlist, jidx, jcount, j)
    return j


@jit
def _coupled_advance(xpos, ypos, in_i, jlist, jidx, jcount, top, clock, L, rate_j,
                     t_stop, rng, counters, max_events):
    """Run coupled events up to ``t_stop`` (or ``max_events``).

    Uses a uniform clock of rate 2|J| + 2 eps j: each label in J owns two
    unit-rate slots (y or matched move, x move when discrepant) and each
    slot picks a direction; slots that do not exist and moves off the
    lattice are null events. Returns the last event kind, or NEED_ROOM when
    the label arrays must grow before the next creation.
    """
    done = 0
    kind = NULL
    while True:
        if top[0] + 1 >= xpos.shape[0]:
            return NEED_ROOM
        nj = jcount[0]
        death_rate = rate_j if nj > 0 else 0.0
        lam = 2.0 * nj + rate_j + death_rate
        u = rng.random()
        wait = -math.log(1.0 - u) / lam
        if clock[0] + wait > t_stop:
            clock[0] = t_stop
            return kind
        clock[0] += wait
        pick = rng.random() * lam
        if pick < 2.0 * nj:
            slot = int(pick)
            lab = jlist[slot // 2]
            second = slot % 2 == 1
            step = 1 if rng.random() < 0.5 else -1
            matched = in_i[lab] and xpos[lab] == ypos[lab]
            kind = NULL
            if matched:
                if not second:
                    dst = xpos[lab] + step
                    if 0 <= dst <= L:
                        xpos[lab] = dst
                        ypos[lab] = dst
                        kind = MOVE_BOTH
            elif second:
                if in_i[lab]:
                    dst = xpos[lab] + step
                    if 0 <= dst <= L:
                        xpos[lab] = dst
                        kind = MOVE_X
            else:
                dst = ypos[lab] + step
                if 0 <= dst <= L:
                    ypos[lab] = dst
                    kind = MOVE_Y
        elif pick < 2.0 * nj + rate_j:
            top[0] += 1
            lab = top[0]
            xpos[lab] = 0
            ypos[lab] = 0
            in_i[lab] = True
            jlist[nj] = lab
            jidx[lab] = nj
            jcount[0] = nj + 1
            kind = CREATE
        else:
            _death(xpos, ypos, in_i, jlist, jidx, jcount)
            kind = DEATH
        counters[kind] += 1
        done += 1
        if done == max_events:
            return kind


class LabeledPair:
    """State (x, I, y, J, N) of the coupled process.

    Label-indexed arrays: ``xpos[i]`` is the position in the first system
    (-1 when i is not in I), ``ypos[i]`` the position in the second (-1 when
    i is not in J).
    """

    def __init__(self, x0: Sequence[int], y0: Sequence[int], params: LatticeParams,
                 rng: np.random.Generator, capacity: int = 0):
        x0 = np.asarray(x0, dtype=np.int64)
        y0 = np.asarray(y0, dtype=np.int64)
        n, nm = x0.size, y0.size
        if n < 1 or nm < n:
            raise ValueError("need n >= 1 particles in x and at least as many in y")
        L = params.size
        if np.any((x0 < 0) | (x0 > L)) or np.any((y0 < 0) | (y0 > L)):
            raise ValueError("positions must lie in [0, 1/eps]")
        self.params = params
        self.rng = rng
        self.n, self.m = n, nm - n
        cap = max(capacity, 2 * nm + 64)
        self.xpos = np.full(cap, -1, dtype=np.int64)
        self.ypos = np.full(cap, -1, dtype=np.int64)
        self.in_i = np.zeros(cap, dtype=np.bool_)
        self.jlist = np.zeros(cap, dtype=np.int64)
        self.jidx = np.full(cap, -1, dtype=np.int64)
        labels = np.arange(1, nm + 1)
        self.xpos[1:n + 1] = x0
        self.in_i[1:n + 1] = True
        self.ypos[labels] = y0
        self.jlist[:nm] = labels
        self.jidx[labels] = np.arange(nm)
        self.jcount = np.array([nm], dtype=np.int64)
        self.top = np.array([nm], dtype=np.int64)
        self._clock = np.zeros(1)
        self.counters = np.zeros(len(EVENT_NAMES), dtype=np.int64)
        self.initial_discrepant = set(self.discrepant_labels())

    @classmethod
    def seeded(cls, x0, y0, params, seed, **kw) -> "LabeledPair":
        return cls(x0, y0, params, np.random.default_rng(seed), **kw)

    @property
    def clock(self) -> float:
        return float(self._clock[0])

    @property
    def N(self) -> int:
        """Largest label ever used (max of J while J is non-empty)."""
        return int(self.top[0])

    @property
    def J(self) -> np.ndarray:
        return np.sort(self.jlist[:self.jcount[0]])

    @property
    def I(self) -> np.ndarray:
        J = self.J
        return J[self.in_i[J]]

    def discrepant_labels(self) -> np.ndarray:
        I = self.I
        return I[self.xpos[I] != self.ypos[I]]

    def x_counts(self) -> np.ndarray:
        return np.bincount(self.xpos[self.I], minlength=self.params.size + 1)

    def y_counts(self) -> np.ndarray:
        return np.bincount(self.ypos[self.J], minlength=self.params.size + 1)

    def _grow(self):
        cap = self.xpos.size
        for name, fill in (("xpos", -1), ("ypos", -1), ("in_i", False), ("jlist", 0), ("jidx", -1)):
            old = getattr(self, name)
            new = np.full(2 * cap, fill, dtype=old.dtype)
            new[:cap] = old
            setattr(self, name, new)

    def _run(self, t_stop: float, max_events: int) -> int:
        while True:
            kind = _coupled_advance(self.xpos, self.ypos, self.in_i, self.jlist, self.jidx, self.jcount,
                                    self.top, self._clock, self.params.size, self.params.eps * self.params.j,
                                    t_stop, self.rng, self.counters, max_events)
            if kind != NEED_ROOM:
                return kind
            self._grow()

    def run_until(self, T: float):
        if T < self.clock:
            raise ValueError("cannot run backwards")
        self._run(T, -1)
        return self


def coupled_step(pair: LabeledPair) -> dict:
    """Apply one event of the uniformized clock (possibly a null event)."""
    kind = pair._run(math.inf, 1)
    return {"time": pair.clock, "event": EVENT_NAMES[kind]}


def discrepancy_count(pair: LabeledPair) -> int:
    return int(pair.discrepant_labels().size)


def l1_distance(pair: LabeledPair) -> int:
    """sum over sites of |xi_x(site) - xi_y(site)|."""
    return int(np.abs(pair.x_counts() - pair.y_counts()).sum())


@dataclass
class CoupledTrace:
    times: np.ndarray
    discrepancies: np.ndarray
    l1: np.ndarray
    m: int


def trace_pair(pair: LabeledPair, times: Sequence[float]) -> CoupledTrace:
    """Discrepancy count and L1 distance at each of the sorted ``times``."""
    d, l1 = [], []
    for t in times:
        pair.run_until(float(t))
        d.append(discrepancy_count(pair))
        l1.append(l1_distance(pair))
    return CoupledTrace(np.asarray(times, dtype=float), np.array(d), np.array(l1), pair.m)


def initial_positions(counts: np.ndarray) -> np.ndarray:
    """Particle positions in site order, one entry per particle."""
    return np.repeat(np.arange(counts.size), counts)
