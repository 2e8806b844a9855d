"""Stationary profiles of the lower barrier map and their small-step limits.

The stationary density on [0, R] is the series
    rho = j*delta * sum_{n>=0} g_{(n+1) delta}(0, .)
of the truncated kernel g (the Neumann kernel killed outside [0, R]).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .kernels import Grid, KernelCache, neumann_green, neumann_source_cells
from .profiles import ProfileSpec

MAX_ITER = 1_000_000
DEFAULT_LADDER = (1e-2, 3e-3, 1e-3)
MIN_CELLS = 400


class SeriesConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class StationarySpec:
    """Edge ``R`` given directly, or as ``1 - A*delta`` when ``A`` is set."""

    delta: float
    j: float = 1.0
    R: Optional[float] = None
    A: Optional[float] = None
    tail_tol: float = 1e-9

    def __post_init__(self):
        if not self.delta > 0 or not self.j > 0 or not self.tail_tol > 0:
            raise ValueError("delta, j and tail_tol must be positive")
        if (self.R is None) == (self.A is None):
            raise ValueError("give exactly one of R or A")
        if self.A is not None and not self.A > 0:
            raise ValueError("A must be positive")
        if not 0 < self.edge <= 1:
            raise ValueError(f"edge {self.edge} outside (0, 1]")

    @property
    def edge(self) -> float:
        return self.R if self.R is not None else 1.0 - self.A * self.delta

    @property
    def a_mode(self) -> bool:
        return self.A is not None


def grid_for(spec: StationarySpec, min_cells: int = MIN_CELLS) -> Grid:
    """Smallest grid with at least ``min_cells`` cells, a node at the edge, and sqrt(delta) >= 2h."""
    need = max(min_cells, int(math.ceil(2.0 / math.sqrt(spec.delta))))
    R = spec.edge
    for m in range(need, need + 100_000):
        if abs(R * m - round(R * m)) < 1e-9:
            return Grid(m)
    raise ValueError(f"no grid with a node at R={R}")


@dataclass
class StationaryResult:
    spec: StationarySpec
    grid: Grid
    density: np.ndarray = field(repr=False)
    iterations: int
    escape_ratio: float
    tail_bound: float
    cache: KernelCache = field(repr=False)

    @property
    def support_cells(self) -> int:
        return self.grid.node_index(self.spec.edge)

    def fixed_point_residual(self) -> float:
        """sup norm of rho - (j delta g(0, .) + g rho)."""
        c = self.cache
        rhs = self.spec.j * self.spec.delta * c.origin_column + c.matrix @ self.density
        return float(np.max(np.abs(self.density - rhs)))

    def mass_balance_defect(self, full: Optional[KernelCache] = None) -> float:
        """|mass pushed beyond R in one step - j delta| for j delta D0 + rho."""
        if full is None:
            full = KernelCache.neumann(self.grid, self.spec.delta)
        k = self.support_cells
        out = self.spec.j * self.spec.delta * full.origin_column + full.matrix @ self.density
        escaped = out[k:].sum() / self.grid.m
        return abs(escaped - self.spec.j * self.spec.delta)

    def value_at(self, r: float) -> float:
        """Pointwise value from the fixed-point equation (defined up to and including R)."""
        R, d = self.spec.edge, self.spec.delta
        if not 0 <= r <= R:
            return 0.0
        k = self.support_cells
        row = neumann_source_cells(d, r, self.grid.m)[:k]
        return float(self.spec.j * d * neumann_green(d, 0.0, r) + row @ self.density[:k] / self.grid.m)

    @property
    def mass(self) -> float:
        return float(self.density.sum()) / self.grid.m


def stationary_series(spec: StationarySpec, grid: Optional[Grid] = None,
                      cache: Optional[KernelCache] = None, max_iter: int = MAX_ITER) -> StationaryResult:
    """Accumulate the series until the geometric tail estimate drops below tail_tol."""
    grid = grid or grid_for(spec)
    R = spec.edge
    if cache is None:
        cache = KernelCache.truncated(grid, spec.delta, R)
    elif cache.kind != "truncated" or not math.isclose(cache.R, R) or not math.isclose(cache.t, spec.delta):
        raise ValueError("cache does not match the spec")
    k = cache.support_cells
    A = np.ascontiguousarray(cache.matrix[:k, :k])
    scale = spec.j * spec.delta
    v = cache.origin_column[:k].copy()
    acc = v.copy()
    ratio, tail, it = 0.0, math.inf, 0
    prev = v.sum()
    # term by term while a matrix-vector product is the cheaper route (about
    # k terms), then by doubling: sum_{n<2N} = sum_{n<N} + A^N sum_{n<N}
    while it < min(k, max_iter):
        v = A @ v
        acc += v
        it += 1
        cur = v.sum()
        ratio = cur / prev if prev > 0 else 0.0
        prev = cur
        # once the slowest mode dominates the terms shrink geometrically
        if ratio < 1.0:
            tail = float(np.max(v)) * ratio / (1.0 - ratio)
            if scale * tail < spec.tail_tol:
                break
    else:
        if it >= max_iter:
            raise SeriesConvergenceError(f"series not converged after {max_iter} terms (ratio {ratio:.6f})")
        # restart from a power-of-two number of terms and keep doubling
        n = 1 << int(math.floor(math.log2(it + 1)))
        P = np.linalg.matrix_power(A, n)
        acc = cache.origin_column[:k].copy()
        w = acc.copy()
        for _ in range(n - 1):
            w = A @ w
            acc += w
        while True:
            if 2 * n > max_iter:
                raise SeriesConvergenceError(f"series not converged after {n} terms (ratio {ratio:.6f})")
            block = P @ acc
            blk = block.sum() / acc.sum()
            acc += block
            ratio = blk ** (1.0 / n)
            n *= 2
            if blk < 1.0:
                tail = float(np.max(block)) * blk / (1.0 - blk)
                if scale * tail < spec.tail_tol:
                    break
            P = P @ P
        it = n - 1
    density = np.zeros(grid.m)
    density[:k] = scale * acc
    return StationaryResult(spec, grid, density, it, float(ratio), float(scale * tail), cache)


def target_profile(spec: StationarySpec, r):
    r = np.asarray(r, dtype=float)
    if spec.a_mode:
        return 2.0 * spec.j * (1.0 - r) + spec.j / spec.A
    return 2.0 * spec.j * (spec.R - r)


@dataclass
class LadderRow:
    delta: float
    sup_error: float
    margin: float
    edge_value: float
    edge_target: Optional[float]
    result: StationaryResult = field(repr=False)


@dataclass
class LadderReport:
    rows: List[LadderRow]

    @property
    def errors(self) -> List[float]:
        return [row.sup_error for row in self.rows]

    def non_increasing(self, slack: float = 0.0) -> bool:
        e = self.errors
        return all(b <= a + slack for a, b in zip(e, e[1:]))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("# r: macroscopic length; rho, target, error: mass per unit length\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta", "r", "rho", "target", "error"])
            for row in self.rows:
                res = row.result
                k = res.support_cells
                mids = res.grid.midpoints[:k]
                tgt = target_profile(res.spec, mids)
                for r, rho, t in zip(mids, res.density[:k], tgt):
                    w.writerow([repr(row.delta), repr(float(r)), repr(float(rho)),
                                repr(float(t)), repr(float(abs(rho - t)))])


def _sup_error(res: StationaryResult, margin: float) -> float:
    """sup over [0, R - margin] of |rho - target|, rho evaluated pointwise at the
    grid nodes in the window and at its right end."""
    stop = max(res.spec.edge - margin, 0.0)
    nodes = res.grid.nodes
    pts = np.r_[nodes[nodes < stop], stop]
    vals = np.array([res.value_at(r) for r in pts])
    return float(np.max(np.abs(vals - target_profile(res.spec, pts))))


def linear_limit_check(j: float = 1.0, R: Optional[float] = None, A: Optional[float] = None,
                       ladder: Sequence[float] = DEFAULT_LADDER, margin_factor: float = 5.0,
                       tail_tol: float = 1e-9) -> LadderReport:
    """Sup error against the linear limit along a ladder of steps.

    Errors are taken pointwise on [0, R - kappa] with
    kappa = margin_factor * sqrt(delta), away from the edge layer.
    """
    rows = []
    for delta in ladder:
        spec = StationarySpec(delta, j, R=R, A=A, tail_tol=tail_tol)
        res = stationary_series(spec)
        kappa = margin_factor * math.sqrt(delta)
        edge_target = j / A if A is not None else None
        rows.append(LadderRow(delta, _sup_error(res, kappa), kappa,
                              res.value_at(spec.edge), edge_target, res))
    return LadderReport(rows)


def manifold_consistency(M: float, j: float = 1.0, tol: float = 0.08,
                         ladder: Sequence[float] = DEFAULT_LADDER) -> bool:
    """Does the small-step stationary limit reproduce the linear profile of mass M?

    M < j uses the edge R = sqrt(M/j); M > j uses R = 1 - A delta with
    A = j / (M - j), the value at r = 1 of the linear profile being M - j.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    if math.isclose(M, j, rel_tol=0, abs_tol=1e-12):
        # R = 1 is degenerate (nothing escapes, the series diverges), so check
        # that the two closed-form limits on either side meet the profile
        r = Grid(MIN_CELLS).nodes
        ref = ProfileSpec.linear(M, j)(r)
        R_below = math.sqrt((M - 1e-3) / j)
        below = np.where(r <= R_below, 2.0 * j * (R_below - r), 0.0)
        above = 2.0 * j * (1.0 - r) + 1e-3
        return bool(max(np.max(np.abs(below - ref)), np.max(np.abs(above - ref))) <= tol)
    if M < j:
        R = math.sqrt(M / j)
        m0 = max(grid_for(StationarySpec(min(ladder), j, R=1.0)).m, int(math.ceil(2.0 / (1.0 - R))))
        R = round(R * m0) / m0
        if not 0 < R < 1:
            raise ValueError(f"M={M} too close to 0 or j for a {m0}-cell grid")
        M = j * R * R
        report = linear_limit_check(j, R=R, ladder=ladder)
    else:
        A = j / (M - j)
        if A * max(ladder) >= 0.5:
            raise ValueError(f"A={A:.3g} too large for the step ladder (edge 1 - A*delta must stay near 1)")
        report = linear_limit_check(j, A=A, ladder=ladder)
    linear = ProfileSpec.linear(M, j)
    row = report.rows[-1]
    stop = max(row.result.spec.edge - row.margin, 0.0)
    nodes = row.result.grid.nodes
    pts = np.r_[nodes[nodes < stop], stop]
    vals = np.array([row.result.value_at(r) for r in pts])
    return bool(np.max(np.abs(vals - linear(pts))) <= tol)
