"""Microscopic configurations on {0, ..., 1/eps} and their discrete functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fenwick import fw_add, fw_build, fw_find, fw_prefix
from .profiles import ProfileSpec

# ceil() snaps values this close to an integer, absorbing quadrature noise
CEIL_SNAP = 1e-9


@dataclass(frozen=True)
class LatticeParams:
    eps: float
    j: float
    a: float = 0.25  # admissibility exponents
    b: float = 0.75

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        inv = 1.0 / self.eps
        if abs(inv - round(inv)) > 1e-9 * max(1.0, inv) or round(inv) < 2:
            raise ValueError(f"1/eps must be an integer >= 2, got 1/eps={inv}")
        if not self.j > 0:
            raise ValueError(f"j must be positive, got {self.j}")

    @property
    def size(self) -> int:
        """Largest site index, 1/eps."""
        return int(round(1.0 / self.eps))


class ParticleConfig:
    """Occupation numbers with a Fenwick index for suffix and edge queries."""

    def __init__(self, counts):
        counts = np.array(counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1:
            raise ValueError("counts must be a non-empty 1-d array")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        self.counts = counts
        self.total = int(counts.sum())
        self.tree = fw_build(counts)

    @classmethod
    def empty(cls, params: LatticeParams) -> "ParticleConfig":
        return cls(np.zeros(params.size + 1, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.counts.size - 1

    def copy(self) -> "ParticleConfig":
        return ParticleConfig(self.counts.copy())

    def add(self, x: int, k: int = 1):
        if k < 0 and self.counts[x] < -k:
            raise ValueError(f"site {x} holds only {self.counts[x]} particles")
        self.counts[x] += k
        self.total += k
        fw_add(self.tree, x, k)

    def move(self, x: int, y: int):
        self.add(x, -1)
        self.add(y, 1)

    def __eq__(self, other):
        return isinstance(other, ParticleConfig) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"ParticleConfig(total={self.total}, size={self.size})"


def rightmost_occupied(cfg: ParticleConfig) -> Optional[int]:
    """Rightmost occupied site, or ``None`` for the empty configuration."""
    if cfg.total == 0:
        return None
    return int(fw_find(cfg.tree, cfg.total - 1))


def suffix_count(cfg: ParticleConfig, x: int) -> int:
    """Number of particles at sites >= x."""
    if not 0 <= x <= cfg.size:
        raise IndexError(f"site {x} outside [0, {cfg.size}]")
    return cfg.total - int(fw_prefix(cfg.tree, x))


def suffix_table(cfg: ParticleConfig) -> np.ndarray:
    """``suffix_count`` at every site, in one pass."""
    return np.cumsum(cfg.counts[::-1])[::-1]


def empirical_average(cfg: ParticleConfig, x: int, ell: int) -> float:
    if ell < 1:
        raise ValueError("window length must be >= 1")
    if x < 0 or x + ell - 1 > cfg.size:
        raise IndexError(f"window [{x}, {x + ell - 1}] overruns [0, {cfg.size}]")
    return float(cfg.counts[x:x + ell].sum()) / ell


def mass_density(cfg: ParticleConfig, params: LatticeParams) -> float:
    return params.eps * cfg.total


def _snapped_ceil(z: np.ndarray) -> np.ndarray:
    near = np.rint(z)
    return np.where(np.abs(z - near) < CEIL_SNAP, near, np.ceil(z)).astype(np.int64)


def build_initial_config(params: LatticeParams, spec: ProfileSpec | None = None,
                         N: int | None = None, mass_cap: float | None = None) -> ParticleConfig:
    """Particle approximation of a profile by rounding its cumulative mass up.

    With ``N`` the profile is the linear stationary one of mass ``eps * N``.
    Site 1/eps is left empty.
    """
    if (spec is None) == (N is None):
        raise ValueError("give exactly one of spec or N")
    L, eps = params.size, params.eps
    if N is not None:
        if N < 0:
            raise ValueError("N must be non-negative")
        if mass_cap is not None and N > mass_cap / eps:
            raise ValueError(f"N={N} exceeds mass cap {mass_cap} / eps")
        spec = ProfileSpec.linear(eps * N, params.j)
    right = eps * np.arange(1, L + 1)
    cum = _snapped_ceil(spec.cumulative_at(right) / eps)
    counts = np.zeros(L + 1, dtype=np.int64)
    counts[:L] = np.diff(np.r_[0, cum])
    if mass_cap is not None and counts.sum() > mass_cap / eps + CEIL_SNAP:
        raise ValueError(f"profile mass exceeds cap {mass_cap}")
    return ParticleConfig(counts)


@dataclass(frozen=True)
class Admissibility:
    max_deviation: float
    edge_deviation: Optional[float]
    bound: float

    @property
    def ok(self) -> bool:
        return self.max_deviation <= self.bound and (
            self.edge_deviation is None or self.edge_deviation <= self.bound)


def check_admissible(cfg: ParticleConfig, spec: ProfileSpec, params: LatticeParams) -> Admissibility:
    """Block-average and edge closeness of ``cfg`` to ``spec`` at scale eps**a."""
    eps, L = params.eps, params.size
    ell = int(math.floor(eps ** (-params.b)))
    xs = np.arange(0, L - ell + 2)
    csum = np.r_[0, np.cumsum(cfg.counts)]
    micro = (csum[xs + ell] - csum[xs]) / ell
    cum = spec.cumulative_at(np.minimum(eps * np.r_[xs, xs + ell], 1.0))
    macro = (cum[xs.size:] - cum[:xs.size]) / (eps * ell)
    dev = float(np.max(np.abs(micro - macro)))
    edge_dev = None
    if spec.edge is not None:
        R = rightmost_occupied(cfg)
        edge_dev = abs(eps * (R if R is not None else 0) - spec.edge)
    return Admissibility(dev, edge_dev, eps ** params.a)
