"""Macroscopic states c*D0 + rho, cut-and-paste, and the upper/lower barriers.

A state is an atom of mass ``c`` at the origin plus a non-negative density held
as cell averages on a uniform grid of [0, 1]. Everything is compared through
the suffix mass F(r; u), the integral of u over [r, 1]; the atom counts only
at r = 0.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .kernels import Grid, GridMismatchError, KernelCache, _neumann_origin_cells, apply_kernel
from .profiles import ProfileSpec

ORDER_TOL = 1e-12
N_MAX = 16


class MassTooSmallError(ValueError):
    """Density mass does not exceed j*delta, so cut-and-paste is undefined."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class MeasureU:
    atom: float
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "density", d)
        if self.atom < 0 or d.ndim != 1 or d.size < 2:
            raise ValueError("need atom >= 0 and a 1-d density with >= 2 cells")
        if np.any(d < -1e-14):
            raise ValueError("density must be non-negative")

    @property
    def m(self) -> int:
        return self.density.size

    @property
    def grid(self) -> Grid:
        return Grid(self.m)

    @property
    def density_mass(self) -> float:
        return float(self.density.sum()) / self.m

    @property
    def mass(self) -> float:
        return self.atom + self.density_mass

    def F_nodes(self) -> np.ndarray:
        """F at the grid nodes; the value at r = 0 includes the atom."""
        tail = np.zeros(self.m + 1)
        tail[:-1] = np.cumsum(self.density[::-1])[::-1] / self.m
        tail[0] += self.atom
        return tail

    def F_zero_plus(self) -> float:
        return self.density_mass

    def smeared(self) -> "MeasureU":
        """Same mass with the atom spread over the first cell."""
        d = self.density.copy()
        d[0] += self.atom * self.m
        return MeasureU(0.0, d)

    def to_json(self) -> dict:
        return {"atom": float(self.atom), "cells": [float(v) for v in self.density]}

    @classmethod
    def from_json(cls, obj) -> "MeasureU":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(float(obj["atom"]), np.asarray(obj["cells"], dtype=float))

    def write_csv(self, path, r_unit="macroscopic length"):
        """Rows of (r, rho(r), F(r)) at cell midpoints, units comment first."""
        g = self.grid
        F = self.F_nodes()
        F_mid = 0.5 * (F[:-1] + F[1:])
        F_mid[0] = 0.5 * (self.F_zero_plus() + F[1])
        with open(path, "w", newline="") as fh:
            fh.write(f"# r: {r_unit}; rho: mass per unit length; F: mass; atom={self.atom!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "rho", "F"])
            for r, rho, f in zip(g.midpoints, self.density, F_mid):
                w.writerow([repr(float(r)), repr(float(rho)), repr(float(f))])


def _check_same_grid(u: MeasureU, v: MeasureU):
    if u.m != v.m:
        raise GridMismatchError(f"grids differ: {u.m} vs {v.m} cells")


def F_functional(u: MeasureU, r):
    """Suffix mass F(r; u); exact for the piecewise-constant density."""
    r_arr = np.asarray(r, dtype=float)
    if np.any((r_arr < 0) | (r_arr > 1)):
        raise ValueError("r must lie in [0, 1]")
    F = u.F_nodes()
    F[0] = u.F_zero_plus()
    out = np.interp(r_arr, u.grid.nodes, F)
    out = np.where(r_arr == 0.0, out + u.atom, out)
    return float(out) if np.ndim(r) == 0 else out


def sup_F_distance(u: MeasureU, v) -> float:
    """sup over r of |F(r; u) - F(r; v)|; ``v`` may be a MeasureU or a ProfileSpec."""
    Fu = u.F_nodes()
    if isinstance(v, ProfileSpec):
        Fv = v.suffix_mass(u.grid.nodes)
        zero_plus = abs(u.F_zero_plus() - Fv[0])
    else:
        _check_same_grid(u, v)
        Fv = v.F_nodes()
        zero_plus = abs(u.F_zero_plus() - v.F_zero_plus())
    return float(max(np.max(np.abs(Fu - Fv)), zero_plus))


def order_slack(u: MeasureU, v: MeasureU) -> float:
    """min over r of F(r; v) - F(r; u); non-negative iff u <= v."""
    _check_same_grid(u, v)
    return float(min(np.min(v.F_nodes() - u.F_nodes()), v.F_zero_plus() - u.F_zero_plus()))


def partial_order_leq(u: MeasureU, v: MeasureU, tol: float = ORDER_TOL) -> bool:
    return order_slack(u, v) >= -tol


def in_U_delta(u: MeasureU, delta: float, j: float) -> bool:
    return u.density_mass > j * delta


def cut_and_paste(u: MeasureU, delta: float, j: float) -> MeasureU:
    """Move mass j*delta from the right end of the density to an atom at 0."""
    return _cut(u, delta, j)[0]


def cut_point(u: MeasureU, delta: float, j: float) -> float:
    """The R solving  integral of the density over [R, 1] = j*delta."""
    return _cut(u, delta, j)[1]


def _cut(u: MeasureU, delta: float, j: float):
    target = j * delta
    h = 1.0 / u.m
    w = u.density * h
    S = np.cumsum(w[::-1])[::-1]  # S[k] = mass of cells k..m-1
    if not S[0] > target:
        raise MassTooSmallError(f"density mass {S[0]:.6g} <= j*delta = {target:.6g}")
    # last cell k with S[k] >= target; the cut falls inside it
    k = int(np.nonzero(S >= target)[0][-1])
    after = S[k + 1] if k + 1 < u.m else 0.0
    removed = target - after
    keep = 1.0 - removed / w[k] if w[k] > 0 else 0.0
    d = u.density.copy()
    d[k + 1:] = 0.0
    d[k] *= keep
    return MeasureU(u.atom + target, d), (k + keep) * h


def barrier_step_minus(u: MeasureU, delta: float, j: float, cache: KernelCache) -> MeasureU:
    """Heat kernel, then cut-and-paste."""
    return cut_and_paste(MeasureU(0.0, apply_kernel(cache, u)), delta, j)


def barrier_step_plus(u: MeasureU, delta: float, j: float, cache: KernelCache) -> MeasureU:
    """Cut-and-paste, then heat kernel."""
    return MeasureU(0.0, apply_kernel(cache, cut_and_paste(u, delta, j)))


@dataclass
class BarrierPair:
    lower: MeasureU
    upper: MeasureU
    delta: float
    steps_done: int = 0
    min_order_slack: float = math.inf

    @classmethod
    def start(cls, u0: MeasureU, delta: float) -> "BarrierPair":
        return cls(u0, u0, delta)

    def advance(self, j: float, cache: KernelCache, steps: int = 1, check_order: bool = True):
        if not math.isclose(cache.t, self.delta, rel_tol=1e-12):
            raise ValueError(f"cache built for t={cache.t}, barrier step is {self.delta}")
        for _ in range(steps):
            self.lower = barrier_step_minus(self.lower, self.delta, j, cache)
            self.upper = barrier_step_plus(self.upper, self.delta, j, cache)
            self.steps_done += 1
            if check_order:
                self.min_order_slack = min(self.min_order_slack, order_slack(self.lower, self.upper))
        return self

    @property
    def gap(self) -> float:
        return sup_F_distance(self.lower, self.upper)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.upper.density + self.lower.smeared().density)

    def balanced(self) -> np.ndarray:
        """Midpoint with the lower atom spread by the time-averaged kernel.

        The atom holds mass fed in over the last step; spreading it by the mean
        of the kernel over [0, delta] removes the O(delta) layer at the origin
        that the plain midpoint carries. The result stays between the barriers.
        """
        spread = self.lower.atom * averaged_origin_cells(self.delta, self.lower.m)
        return 0.5 * (self.upper.density + self.lower.density + spread)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def averaged_origin_cells(delta: float, m: int) -> np.ndarray:
    """Cell averages of (1/delta) * integral over s in [0, delta] of the kernel from 0."""
    # s = delta * u**2 takes the 1/sqrt(s) behaviour out of the integrand
    u = 0.5 * (_GL_NODES + 1.0)
    out = np.zeros(m)
    for ui, wi in zip(u, 0.5 * _GL_WEIGHTS):
        out += wi * 2.0 * ui * _neumann_origin_cells(delta * ui * ui, m)
    return out


def resolution_ok(delta: float, grid: Grid) -> bool:
    return math.sqrt(delta) >= 2.0 * grid.h


def run_barriers(u0: MeasureU, t: float, n: int, j: float, check_order: bool = True) -> BarrierPair:
    """Both barriers at time ``t`` with step ``t / 2**n``."""
    delta = t / 2 ** n
    grid = u0.grid
    if not resolution_ok(delta, grid):
        warnings.warn(f"sqrt(delta)={math.sqrt(delta):.3g} < 2h={2 * grid.h:.3g}; refine the grid",
                      RuntimeWarning, stacklevel=2)
    if not u0.density_mass > j * delta:
        raise MassTooSmallError(f"initial density mass {u0.density_mass:.6g} <= j*delta={j * delta:.6g}")
    cache = KernelCache.neumann(grid, delta)
    return BarrierPair.start(u0, delta).advance(j, cache, 2 ** n, check_order)


@dataclass
class SeparatingElement:
    density: np.ndarray
    gap: float
    n: int
    pair: BarrierPair
    gaps: List[float]
    levels: List[int]
    lower_F: List[np.ndarray]
    upper_F: List[np.ndarray]

    @property
    def measure(self) -> MeasureU:
        return MeasureU(0.0, self.density)


def separating_element(u0: MeasureU, t: float, j: float, tol: float = 5e-3,
                       n_max: int = N_MAX, n_min: int = 1) -> SeparatingElement:
    """Refine the barrier step t/2**n until their F-gap falls below ``tol``.

    Returns the midpoint of the two barriers, with the atom of the lower one
    spread over the first cell.
    """
    if not u0.mass > 0 or not t > 0:
        raise ValueError("need positive initial mass and t > 0")
    gaps, levels, lowF, upF = [], [], [], []
    pair = None
    for n in range(n_min, n_max + 1):
        if not u0.density_mass > j * t / 2 ** n:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pair = run_barriers(u0, t, n, j, check_order=False)
        gaps.append(pair.gap)
        levels.append(n)
        lowF.append(pair.lower.F_nodes())
        upF.append(pair.upper.F_nodes())
        if gaps[-1] < tol:
            return SeparatingElement(pair.midpoint(), gaps[-1], n, pair, gaps, levels, lowF, upF)
    raise ConvergenceError(f"barrier gap above tol={tol} after n={n_max}",
                           gaps[-1] if gaps else math.inf)


def fixed_step_element(u0: MeasureU, t: float, delta: float, j: float) -> BarrierPair:
    """Barriers at time ``t`` with a prescribed step; ``t / delta`` must be an integer.

    Comparing several times at one step keeps the discretization error the
    same for all of them, so differences between times reflect the dynamics.
    """
    steps = int(round(t / delta))
    if steps < 1 or not math.isclose(steps * delta, t, rel_tol=1e-12):
        raise ValueError(f"t={t} is not a multiple of delta={delta}")
    if not u0.density_mass > j * delta:
        raise MassTooSmallError(f"initial density mass {u0.density_mass:.6g} <= j*delta={j * delta:.6g}")
    cache = KernelCache.neumann(u0.grid, delta)
    return BarrierPair.start(u0, delta).advance(j, cache, steps, check_order=False)


def linear_profile(M: float, j: float, grid: Optional[Grid] = None) -> MeasureU:
    """Cell averages of the stationary linear profile of mass ``M``."""
    if M < 0 or j <= 0:
        raise ValueError("need M >= 0 and j > 0")
    grid = grid or Grid(400)
    cum = ProfileSpec.linear(M, j).cumulative_at(grid.nodes)
    return MeasureU(0.0, np.maximum(np.diff(cum), 0.0) * grid.m)


def profile_measure(spec: ProfileSpec, grid: Grid) -> MeasureU:
    """Cell averages of an arbitrary profile."""
    cum = spec.cumulative_at(grid.nodes)
    return MeasureU(0.0, np.maximum(np.diff(cum), 0.0) * grid.m)
