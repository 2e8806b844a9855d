import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from curres.barriers import MeasureU
from curres.kernels import (Grid, KernelCache, _neumann_cosine, _neumann_images, apply_kernel, dirichlet_green,
                            dirichlet_resolvent_origin, neumann_green, semigroup_defect)

# independent plain-python image sum over |k| <= 20
NEUMANN_01_HALF = 1.2785669994156845
DIRICHLET_005_ORIGIN = 1.7839621179336493


def plain_neumann(t, r, s):
    return sum(math.exp(-(r - s - 2 * k) ** 2 / (2 * t)) + math.exp(-(r + s - 2 * k) ** 2 / (2 * t))
               for k in range(-20, 21)) / math.sqrt(2 * math.pi * t)


def test_neumann_point_values():
    assert float(neumann_green(0.1, 0.5, 0.5)) == pytest.approx(NEUMANN_01_HALF, abs=1e-10)
    assert float(neumann_green(100.0, 0.3, 0.9)) == pytest.approx(1.0, abs=1e-10)
    assert float(neumann_green(0.02, 0.1, 0.7)) == pytest.approx(float(neumann_green(0.02, 0.7, 0.1)), abs=1e-15)


@given(st.floats(1e-3, 3.0), st.floats(0, 1), st.floats(0, 1))
def test_neumann_matches_plain_images(t, r, s):
    assert float(neumann_green(t, r, s)) == pytest.approx(plain_neumann(t, r, s), rel=1e-9, abs=1e-9)


def test_images_vs_series_grid():
    pts = np.linspace(0, 1, 10)
    for t in np.geomspace(1e-3, 10, 25):
        a = _neumann_images(t, pts[:, None], pts[None, :])
        b = _neumann_cosine(t, pts[:, None], pts[None, :])
        assert np.max(np.abs(a - b)) <= 1e-8


def test_dirichlet_values():
    assert float(dirichlet_green(0.05, 0.0, 0.0, 0.5)) == pytest.approx(DIRICHLET_005_ORIGIN, abs=1e-10)
    assert 0 < float(dirichlet_green(0.05, 0.0, 0.0, 0.5)) < 1 / math.sqrt(0.1 * math.pi)
    for t in (0.01, 0.3, 2.0):
        assert abs(float(dirichlet_green(t, 0.5, 0.1, 0.5))) < 1e-10
    assert float(dirichlet_green(50.0, 0.0, 0.1, 0.5)) < 1e-10


@pytest.mark.parametrize("r,expected", [(0.0, 0.5), (0.25, 0.25), (0.45, 0.05), (0.5, 0.0), (-0.5, 0.0)])
def test_resolvent_is_tent(r, expected):
    assert dirichlet_resolvent_origin(0.5, r) == pytest.approx(expected, abs=1e-3)


def test_apply_atom_uniformizes():
    g = Grid(100)
    out = apply_kernel(KernelCache.neumann(g, 100.0), MeasureU(1.0, np.zeros(100)))
    assert np.max(np.abs(out - 1.0)) <= 1e-8


def test_apply_constant_invariant():
    g = Grid(200)
    for t in (1e-3, 0.1, 2.0):
        out = apply_kernel(KernelCache.neumann(g, t), MeasureU(0.0, np.full(200, 0.7)))
        assert np.max(np.abs(out - 0.7)) <= 1e-10


@given(st.floats(1e-3, 5.0), st.floats(0, 2), st.lists(st.floats(0, 5), min_size=40, max_size=40))
def test_neumann_mass_conservation(t, atom, dens):
    u = MeasureU(atom, np.asarray(dens))
    out = apply_kernel(KernelCache.neumann(Grid(40), t), u)
    assert abs(out.sum() / 40 - u.mass) <= 1e-8 * max(u.mass, 1.0)


def test_semigroup_pointwise():
    pts = np.linspace(0, 1, 11)
    for t in (1e-3, 0.01, 0.1, 1.0):
        assert semigroup_defect(t, pts) <= 1e-6


def test_truncated_dominated_and_leaks():
    g = Grid(100)
    base = KernelCache.neumann(g, 0.01)
    tr = KernelCache.truncated(g, 0.01, 0.5, base)
    assert np.all(tr.matrix <= base.matrix + 1e-15)
    u = np.zeros(100)
    u[:50] = 1.0
    assert (tr.matrix @ u).sum() < u.sum()


def test_grid_mismatch():
    from curres.kernels import GridMismatchError
    with pytest.raises(GridMismatchError):
        apply_kernel(KernelCache.neumann(Grid(10), 0.1), MeasureU(0.0, np.ones(12)))
