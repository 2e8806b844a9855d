"""Macroscopic density profiles on [0, 1] and their suffix masses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

QUAD_ABS_TOL = 1e-10


def linear_edge(M: float, j: float) -> float:
    """Edge of the linear stationary profile of mass ``M`` (1.0 when M >= j)."""
    if M < 0 or j <= 0:
        raise ValueError(f"need M >= 0 and j > 0, got M={M}, j={j}")
    return math.sqrt(M / j) if M < j else 1.0


def linear_intercept(M: float, j: float) -> float:
    """Value at r = 0 of the linear profile of mass ``M``."""
    if M < j:
        return 2.0 * j * linear_edge(M, j)
    return M + j


@dataclass(frozen=True)
class ProfileSpec:
    """A non-negative continuous density on [0, 1].

    ``cumulative`` (r -> integral of the density over [0, r]) is used when
    known in closed form; otherwise integrals fall back to adaptive quadrature.
    """

    density: Callable[[np.ndarray], np.ndarray]
    edge: Optional[float] = None
    cumulative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kind: str = "callable"
    params: tuple = ()

    def __post_init__(self):
        if self.edge is not None and not (0.0 < self.edge <= 1.0):
            raise ValueError(f"edge must lie in (0, 1], got {self.edge}")
        probe = np.asarray(self.density(np.linspace(0.0, 1.0, 2001)), dtype=float)
        if np.any(probe < 0) or not np.all(np.isfinite(probe)):
            raise ValueError("profile density must be finite and non-negative")
        if self.edge is not None:
            tail = probe[np.linspace(0.0, 1.0, 2001) >= self.edge]
            if np.any(tail > 1e-12):
                raise ValueError("profile density must vanish beyond its edge")

    def __call__(self, r):
        return np.asarray(self.density(np.asarray(r, dtype=float)), dtype=float)

    def integral(self, a: float, b: float) -> float:
        a, b = max(a, 0.0), min(b, 1.0)
        if b <= a:
            return 0.0
        if self.cumulative is not None:
            return float(self.cumulative(b) - self.cumulative(a))
        points = [self.edge] if self.edge is not None and a < self.edge < b else None
        val, _ = integrate.quad(lambda r: float(self.density(np.array(r))), a, b,
                                epsabs=QUAD_ABS_TOL, epsrel=0.0, limit=200, points=points)
        return val

    def cumulative_at(self, r: np.ndarray) -> np.ndarray:
        """Integral of the density over [0, r] for every entry of ``r``."""
        r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
        if self.cumulative is not None:
            return np.asarray(self.cumulative(r), dtype=float)
        flat = np.sort(np.unique(r.ravel()))
        pieces = np.array([self.integral(a, b) for a, b in zip(np.r_[0.0, flat[:-1]], flat)])
        acc = dict(zip(flat, np.cumsum(pieces)))
        return np.vectorize(acc.__getitem__)(r)

    @property
    def mass(self) -> float:
        return self.integral(0.0, 1.0)

    def suffix_mass(self, r) -> np.ndarray:
        """F(r) = integral of the density over [r, 1]."""
        return self.mass - self.cumulative_at(r)

    def to_json(self) -> dict:
        if self.kind == "callable":
            raise ValueError("callable profiles have no JSON form")
        return {"kind": self.kind, **dict(self.params)}

    # constructors

    @classmethod
    def linear(cls, M: float, j: float) -> "ProfileSpec":
        """The stationary profile with slope -2j and total mass ``M``."""
        R = linear_edge(M, j)
        c = linear_intercept(M, j)
        if M == 0:
            return cls(lambda r: np.zeros_like(np.asarray(r, dtype=float)), None,
                       lambda r: np.zeros_like(np.asarray(r, dtype=float)),
                       "linear", (("mass", M), ("j", j)))

        def dens(r):
            r = np.asarray(r, dtype=float)
            return np.where(r <= R, np.maximum(c - 2.0 * j * r, 0.0), 0.0)

        def cum(r):
            rr = np.minimum(np.asarray(r, dtype=float), R)
            return c * rr - j * rr * rr

        edge = R if M <= j else None
        return cls(dens, edge, cum, "linear", (("mass", M), ("j", j)))

    @classmethod
    def uniform(cls, M: float) -> "ProfileSpec":
        if M < 0:
            raise ValueError("uniform profile needs M >= 0")
        return cls(lambda r: np.full_like(np.asarray(r, dtype=float), M),
                   None, lambda r: M * np.asarray(r, dtype=float),
                   "uniform", (("mass", M),))

    @classmethod
    def table(cls, r_pts, rho_pts) -> "ProfileSpec":
        """Piecewise-linear interpolation of ``(r, rho)`` samples."""
        r_pts = np.asarray(r_pts, dtype=float)
        rho_pts = np.asarray(rho_pts, dtype=float)
        if r_pts.ndim != 1 or r_pts.shape != rho_pts.shape or r_pts.size < 2:
            raise ValueError("table needs matching 1-d r and rho arrays of length >= 2")
        if np.any(np.diff(r_pts) <= 0) or r_pts[0] > 0 or r_pts[-1] < 1:
            raise ValueError("table r must be strictly increasing and cover [0, 1]")
        if np.any(rho_pts < 0):
            raise ValueError("profile density must be non-negative")
        cum_nodes = np.r_[0.0, np.cumsum(0.5 * (rho_pts[1:] + rho_pts[:-1]) * np.diff(r_pts))]
        cum_nodes -= np.interp(0.0, r_pts, cum_nodes)

        def dens(r):
            return np.interp(r, r_pts, rho_pts)

        def cum(r):
            r = np.asarray(r, dtype=float)
            k = np.clip(np.searchsorted(r_pts, r, side="right") - 1, 0, r_pts.size - 2)
            dr = r - r_pts[k]
            slope = (rho_pts[k + 1] - rho_pts[k]) / (r_pts[k + 1] - r_pts[k])
            return cum_nodes[k] + rho_pts[k] * dr + 0.5 * slope * dr * dr

        nz = np.nonzero(rho_pts > 0)[0]
        edge = None
        if nz.size and nz[-1] < r_pts.size - 1:
            edge = float(r_pts[nz[-1] + 1])
        elif nz.size == 0:
            edge = None
        params = (("r", r_pts.tolist()), ("rho", rho_pts.tolist()))
        return cls(dens, edge, cum, "table", params)

    @classmethod
    def from_json(cls, obj: dict, j: Optional[float] = None) -> "ProfileSpec":
        """Build from ``{"kind": "linear"|"uniform"|"table", ...}``."""
        kind = obj.get("kind")
        if kind == "linear":
            jj = obj.get("j", j)
            if jj is None:
                raise ValueError("linear profile needs 'j'")
            return cls.linear(float(obj["mass"]), float(jj))
        if kind == "uniform":
            return cls.uniform(float(obj["mass"]))
        if kind == "table":
            if "points" in obj:
                pts = np.asarray(obj["points"], dtype=float)
                return cls.table(pts[:, 0], pts[:, 1])
            return cls.table(obj["r"], obj["rho"])
        raise ValueError(f"unknown profile kind {kind!r}")
