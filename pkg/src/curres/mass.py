"""Total particle number: reflected random walk, its Gaussian limit, and tests.

The particle number changes only through births (rate eps*j) and deaths
(rate eps*j when non-empty), so it is a continuous-time walk on {0, 1, ...}
jumping at rate 2*eps*j by +-1 with the move to -1 suppressed.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import ndtr

from ._jit import jit

KS_COEFF_5PCT = 1.36
MIN_REPLICAS = 100


class InsufficientDataError(ValueError):
    pass


@dataclass
class MassPath:
    times: np.ndarray
    values: np.ndarray
    eps: float
    j: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same shape")
        if np.any(self.values < 0):
            raise ValueError("particle numbers must be non-negative")

    def rescaled(self) -> np.ndarray:
        """eps * |xi_t|."""
        return self.eps * self.values

    def macro_times(self, exponent: int = 3) -> np.ndarray:
        """Times in units of eps**-exponent."""
        return self.times * self.eps ** exponent


def mass_walk_step(n: int, eps: float, j: float, rng: np.random.Generator, with_time: bool = False):
    """One jump of the walk: wait Exp(2 eps j), then +-1 with the move to -1 suppressed."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rate = 2.0 * eps * j
    wait = -math.log(1.0 - rng.random()) / rate if rate > 0 else math.inf
    up = rng.random() < 0.5
    new = n + 1 if up else (n - 1 if n > 0 else n)
    return (new, wait) if with_time else new


@jit
def _walk_path(n0, rate, times, rng, out, tallies):
    """Values of the walk at the sorted ``times``; tallies = (jumps, suppressed, up)."""
    n = n0
    clock = 0.0
    k = 0
    m = times.shape[0]
    while k < m:
        wait = -math.log(1.0 - rng.random()) / rate
        while k < m and clock + wait > times[k]:
            out[k] = n
            k += 1
        if k == m:
            break
        clock += wait
        tallies[0] += 1
        if rng.random() < 0.5:
            n += 1
            tallies[2] += 1
        elif n > 0:
            n -= 1
        else:
            tallies[1] += 1
    return n


def mass_walk_path(n0: int, eps: float, j: float, times: Sequence[float], rng: np.random.Generator):
    """Event-by-event path of the walk sampled at ``times``; returns (MassPath, tallies)."""
    times = np.asarray(times, dtype=float)
    if times.size and np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted")
    out = np.zeros(times.size, dtype=np.int64)
    tallies = np.zeros(3, dtype=np.int64)
    rate = 2.0 * eps * j
    if rate > 0:
        _walk_path(int(n0), rate, times, rng, out, tallies)
    else:
        out[:] = n0
    return MassPath(times, out, eps, j), tallies


def fold(k):
    """Map the free walk onto {0, 1, ...}: k for k >= 0, -k-1 for k < 0."""
    k = np.asarray(k)
    return np.where(k >= 0, k, -k - 1)


def mass_walk_sample(n0: int, eps: float, j: float, T: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws of the walk at time T.

    The number of jump attempts is Poisson(2 eps j T); folding the free
    +-1 walk at -1/2 reproduces the suppression rule exactly.
    """
    K = rng.poisson(2.0 * eps * j * T, size=size)
    ups = rng.binomial(K, 0.5)
    return fold(n0 + 2 * ups - K).astype(np.int64)


def folded_normal_cdf(x, m: float, sigma2: float):
    """P[|m + sigma Z| <= x], the marginal of Brownian motion reflected at 0."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    x = np.asarray(x, dtype=float)
    s = math.sqrt(sigma2)
    val = ndtr((x - m) / s) - ndtr((-x - m) / s)
    out = np.where(x < 0, 0.0, val)
    return float(out) if out.ndim == 0 else out


@dataclass
class MassTestReport:
    statistic: Optional[float]
    threshold: float
    verdict: Optional[bool]
    N: int
    variance: float
    note: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def supercritical_mass_test(samples, m: float, j: float, t: float, threshold: Optional[float] = None,
                            variance: Optional[float] = None) -> MassTestReport:
    """One-sample KS distance of rescaled masses against the reflected Gaussian.

    The default variance is j*t and the default threshold the 5% asymptotic
    critical value 1.36/sqrt(N).
    """
    x = np.asarray(samples, dtype=float)
    N = x.size
    if N < MIN_REPLICAS:
        raise InsufficientDataError(f"need at least {MIN_REPLICAS} replicas, got {N}")
    if threshold is None:
        threshold = KS_COEFF_5PCT / math.sqrt(N)
    var = j * t if variance is None else variance
    if not var > 0:
        warnings.warn("zero variance: the limit is a point mass, KS comparison skipped", RuntimeWarning,
                      stacklevel=2)
        return MassTestReport(None, threshold, None, N, 0.0, "skipped: degenerate variance")
    stat = stats.kstest(x, lambda v: folded_normal_cdf(v, m, var)).statistic
    return MassTestReport(float(stat), threshold, bool(stat <= threshold), N, var)


@dataclass
class TightnessReport:
    regime: str
    probability: float
    bound: float
    passed: bool
    N: int


def tightness_check(values, regime: str, delta: float, start: Optional[float] = None,
                    M: Optional[float] = None) -> TightnessReport:
    """Empirical tightness of rescaled masses.

    hydrodynamic: P[|value - start| <= delta] >= 1 - delta.
    super: P[value >= M] <= delta.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InsufficientDataError("no replicas")
    if regime in ("hydro", "hydrodynamic"):
        if start is None:
            raise ValueError("hydrodynamic tightness needs the starting value")
        p = float(np.mean(np.abs(v - start) <= delta))
        return TightnessReport("hydrodynamic", p, 1.0 - delta, p >= 1.0 - delta, v.size)
    if regime == "super":
        if M is None:
            raise ValueError("super tightness needs the level M")
        p = float(np.mean(v >= M))
        return TightnessReport("super", p, delta, p <= delta, v.size)
    raise ValueError(f"unknown regime {regime!r}")


def folded_normal_quantile(q: float, m: float, sigma2: float) -> float:
    """Inverse of folded_normal_cdf by bisection."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    s = math.sqrt(sigma2)
    lo, hi = 0.0, abs(m) + 10.0 * s
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if folded_normal_cdf(mid, m, sigma2) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def write_samples_csv(values, path, unit="eps * particle number"):
    with open(path, "w", newline="") as fh:
        fh.write(f"# value: {unit}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replica_id", "value"])
        for i, v in enumerate(np.asarray(values)):
            w.writerow([i, repr(float(v))])
