"""Heat kernels on [0, 1] (Neumann), [-R, R] (Dirichlet) and the truncated kernel.

All kernels are for the equation u_t = u_rr / 2, so the free-space kernel is the
Gaussian of variance t. Point values switch between the image sum (short
times) and the eigenfunction series (long times); both are truncated once the
neglected tail is below ``TAIL``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import erf, erfc

TAIL = 1e-12
IMAGE_SERIES_SWITCH = 0.5

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)


class GridMismatchError(ValueError):
    pass


def _gauss(x, t):
    return np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * math.pi * t)


def _image_count(t: float, period: float) -> int:
    """Images needed on each side so that omitted Gaussians are below TAIL."""
    # exp(-d^2/2t)/sqrt(2 pi t) < TAIL for d > d_max
    arg = max(math.log(1.0 / (TAIL * math.sqrt(2.0 * math.pi * t))), 1.0)
    d_max = math.sqrt(2.0 * t * arg)
    return int(math.ceil(d_max / period)) + 1


def _mode_count(t: float, lam1: float) -> int:
    """Eigenmodes needed so that exp(-k^2 lam1 t) < TAIL beyond the cut."""
    return int(math.ceil(math.sqrt(math.log(1.0 / TAIL) / (lam1 * t)))) + 1


def neumann_green(t: float, r, r2):
    """Neumann heat kernel on [0, 1]; broadcasts over ``r`` and ``r2``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    r = np.asarray(r, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if t <= IMAGE_SERIES_SWITCH:
        return _neumann_images(t, r, r2)
    return _neumann_cosine(t, r, r2)


def _neumann_images(t, r, r2):
    n_img = _image_count(t, 2.0)
    out = np.zeros(np.broadcast(r, r2).shape)
    for n in range(-n_img, n_img + 1):
        out = out + _gauss(r - r2 - 2 * n, t) + _gauss(r + r2 - 2 * n, t)
    return out


def _neumann_cosine(t, r, r2):
    lam1 = math.pi ** 2 / 2.0
    out = np.ones(np.broadcast(r, r2).shape)
    for k in range(1, _mode_count(t, lam1) + 1):
        out = out + 2.0 * math.exp(-k * k * lam1 * t) * np.cos(k * math.pi * r) * np.cos(k * math.pi * r2)
    return out


def semigroup_defect(t: float, pts, panels: int = 400, order: int = 16) -> float:
    """max over pairs of |int g_t(r, z) g_t(z, r') dz - g_2t(r, r')| by composite Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * (edges[1] - edges[0])
    z = (0.5 * (edges[:-1] + edges[1:])[:, None] + half * x[None, :]).ravel()
    wz = np.tile(half * w, panels)
    pts = np.asarray(pts, dtype=float)
    g = neumann_green(t, pts[:, None], z[None, :])
    lhs = (g * wz) @ g.T
    return float(np.max(np.abs(lhs - neumann_green(2.0 * t, pts[:, None], pts[None, :]))))


def dirichlet_green(t: float, r, r2, R: float):
    """Heat kernel on [-R, R] killed at the endpoints."""
    if not t > 0 or not R > 0:
        raise ValueError("t and R must be positive")
    r = np.asarray(r, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if np.any(np.abs(r) > R * (1 + 1e-12)) or np.any(np.abs(r2) > R * (1 + 1e-12)):
        raise ValueError(f"arguments must lie in [-{R}, {R}]")
    L = 2.0 * R
    if t <= IMAGE_SERIES_SWITCH * L * L:
        n_img = _image_count(t, 2.0 * L)
        out = np.zeros(np.broadcast(r, r2).shape)
        for n in range(-n_img, n_img + 1):
            out = out + _gauss(r - r2 - 2 * n * L, t) - _gauss(r + r2 + L - 2 * n * L, t)
        return out
    lam1 = (math.pi / L) ** 2 / 2.0
    out = np.zeros(np.broadcast(r, r2).shape)
    for k in range(1, _mode_count(t, lam1) + 1):
        out = out + (2.0 / L) * math.exp(-k * k * lam1 * t) * np.sin(k * math.pi * (r + R) / L) \
            * np.sin(k * math.pi * (r2 + R) / L)
    return out


def _free_time_integral(x, T):
    """Integral over (0, T] of the free Gaussian kernel at displacement x."""
    x = abs(x)
    return math.sqrt(2.0 * T / math.pi) * math.exp(-x * x / (2.0 * T)) - x * float(erfc(x / math.sqrt(2.0 * T)))


def dirichlet_resolvent_origin(R: float, r: float, T: float = 20.0, dt: float = 1e-3) -> float:
    """Time integral of the Dirichlet kernel from the origin, over (0, T].

    The stiff start (0, t0] uses the free Gaussian in closed form; the rest is
    composite Simpson in s = sqrt(t), where the integrand is smooth.
    """
    if not 0 < dt < T:
        raise ValueError("need 0 < dt < T")
    if abs(r) > R:
        raise ValueError(f"|r| must be <= R={R}")
    gap = R - abs(r)
    if gap <= 0:
        return 0.0
    t0 = min(1e-3, gap * gap / 25.0)
    head = _free_time_integral(r, t0)
    n = int(math.ceil((T - t0) / dt))
    n += n % 2
    s = np.linspace(math.sqrt(t0), math.sqrt(T), n + 1)
    f = dirichlet_green_vec_t(s * s, r, R) * 2.0 * s
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return head + float(np.dot(w, f)) * (s[1] - s[0]) / 3.0


def dirichlet_green_vec_t(ts: np.ndarray, r: float, R: float) -> np.ndarray:
    """``dirichlet_green(t, 0, r, R)`` for an array of times."""
    ts = np.asarray(ts, dtype=float)
    L = 2.0 * R
    split = IMAGE_SERIES_SWITCH * L * L
    out = np.empty_like(ts)
    short = ts <= split
    if np.any(short):
        tt = ts[short]
        n_img = _image_count(float(tt.max()), 2.0 * L)
        acc = np.zeros_like(tt)
        for n in range(-n_img, n_img + 1):
            acc += _gauss(r - 2 * n * L, tt) - _gauss(r + L - 2 * n * L, tt)
        out[short] = acc
    if np.any(~short):
        tt = ts[~short]
        lam1 = (math.pi / L) ** 2 / 2.0
        acc = np.zeros_like(tt)
        for k in range(1, _mode_count(split, lam1) + 1):
            acc += (2.0 / L) * np.exp(-k * k * lam1 * tt) * math.sin(k * math.pi * (r + R) / L) \
                * math.sin(k * math.pi / 2.0)
        out[~short] = acc
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, 1] into ``m`` cells; densities are cell averages."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("grid needs at least 2 cells")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) / self.m

    def node_index(self, r: float) -> int:
        """Index of the node at ``r``; raises if ``r`` is not a node."""
        k = round(r * self.m)
        if abs(k - r * self.m) > 1e-9:
            raise GridMismatchError(f"r={r} is not a node of the {self.m}-cell grid")
        return int(k)


def _cell_pair_integral(p, h, sigma):
    """Double integral of the centred Gaussian over two cells ``p`` cells apart.

    Equals the second difference of the Gaussian's second antiderivative at
    ``p * h``. Written with upper-tail probabilities so that far-off-diagonal
    entries keep their relative accuracy.
    """
    x = np.abs(np.asarray(p, dtype=float)) * h
    s2 = sigma * SQRT2

    def q(y):
        return 0.5 * erfc(y / s2)

    def g(y):
        return np.exp(-(y / s2) ** 2) / (sigma * SQRT2PI)

    far = -((x + h) * q(x + h) - 2.0 * x * q(x) + (x - h) * q(x - h))
    curv = sigma * sigma * (g(x + h) - 2.0 * g(x) + g(x - h))
    return np.maximum(far + curv, 0.0)


def _phi_cdf(x, sigma):
    return 0.5 * (1.0 + erf(x / (sigma * SQRT2)))


def _neumann_cell_matrix(t: float, m: int) -> np.ndarray:
    """Cell-averaged Neumann kernel: M[i, k] = (1/h) * double integral over cells i, k."""
    h = 1.0 / m
    nodes = np.linspace(0.0, 1.0, m + 1)
    if t <= IMAGE_SERIES_SWITCH:
        sigma = math.sqrt(t)
        n_img = _image_count(t, 2.0)
        # entries depend on i - k (translated images y' + 2n) and on
        # i + k + 1 (reflected images 2n - y'); tabulate once over the offset
        q = np.arange(-(m - 1), 2 * m)
        table = np.zeros(q.size)
        for n in range(-n_img, n_img + 1):
            table += _cell_pair_integral(q - 2 * n * m, h, sigma)
        i = np.arange(m)
        off = m - 1
        return (table[i[:, None] - i[None, :] + off] + table[i[:, None] + i[None, :] + 1 + off]) / h
    lam1 = math.pi ** 2 / 2.0
    ks = np.arange(1, _mode_count(t, lam1) + 1)
    S = (np.sin(np.outer(nodes[1:], ks) * math.pi) - np.sin(np.outer(nodes[:-1], ks) * math.pi)) / (ks * math.pi)
    return h + (2.0 / h) * (S * np.exp(-ks * ks * lam1 * t)) @ S.T


def neumann_source_cells(t: float, r: float, m: int) -> np.ndarray:
    """Cell averages of the Neumann kernel from the source point ``r``."""
    h = 1.0 / m
    nodes = np.linspace(0.0, 1.0, m + 1)
    if t <= IMAGE_SERIES_SWITCH:
        sigma = math.sqrt(t)
        n_img = _image_count(t, 2.0)
        cdf = np.zeros(m + 1)
        for n in range(-n_img, n_img + 1):
            cdf += _phi_cdf(nodes - r - 2.0 * n, sigma) + _phi_cdf(nodes + r - 2.0 * n, sigma)
        return np.diff(cdf) / h
    lam1 = math.pi ** 2 / 2.0
    ks = np.arange(1, _mode_count(t, lam1) + 1)
    S = (np.sin(np.outer(nodes[1:], ks) * math.pi) - np.sin(np.outer(nodes[:-1], ks) * math.pi)) / (ks * math.pi)
    return 1.0 + (2.0 / h) * S @ (np.exp(-ks * ks * lam1 * t) * np.cos(ks * math.pi * r))


def _neumann_origin_cells(t: float, m: int) -> np.ndarray:
    return neumann_source_cells(t, 0.0, m)


@dataclass(frozen=True, eq=False)
class KernelCache:
    """Precomputed action of a kernel at time ``t`` on cell-averaged densities.

    ``kind`` is ``"neumann"`` or ``"truncated"``; the truncated kernel is the
    Neumann one with source and target restricted to [0, R], where R must be a
    grid node.
    """

    kind: str
    t: float
    grid: Grid
    matrix: np.ndarray = field(repr=False)
    origin_column: np.ndarray = field(repr=False)
    R: Optional[float] = None

    @classmethod
    def neumann(cls, grid: Grid, t: float) -> "KernelCache":
        if not t > 0:
            raise ValueError("t must be positive")
        return cls("neumann", t, grid, _neumann_cell_matrix(t, grid.m), _neumann_origin_cells(t, grid.m))

    @classmethod
    def truncated(cls, grid: Grid, t: float, R: float, base: "KernelCache | None" = None) -> "KernelCache":
        if not 0 < R <= 1:
            raise ValueError("R must lie in (0, 1]")
        k = grid.node_index(R)
        if base is None:
            base = cls.neumann(grid, t)
        mat = np.zeros_like(base.matrix)
        mat[:k, :k] = base.matrix[:k, :k]
        col = np.zeros_like(base.origin_column)
        col[:k] = base.origin_column[:k]
        return cls("truncated", t, grid, mat, col, R)

    @property
    def support_cells(self) -> int:
        return self.grid.m if self.R is None else self.grid.node_index(self.R)


def apply_kernel(cache: KernelCache, u) -> np.ndarray:
    """Kernel action on ``u = atom * D0 + density``; the atom is propagated exactly."""
    density = np.asarray(u.density, dtype=float)
    if density.shape != (cache.grid.m,):
        raise GridMismatchError(f"density has {density.shape} cells, cache expects {cache.grid.m}")
    out = cache.matrix @ density
    if u.atom:
        out = out + u.atom * cache.origin_column
    return out
