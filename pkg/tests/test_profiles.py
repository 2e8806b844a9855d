import numpy as np
import pytest

from curres.profiles import ProfileSpec, linear_edge, linear_intercept


def test_linear_subcritical_shape():
    p = ProfileSpec.linear(0.25, 1.0)
    assert p.edge == pytest.approx(0.5)
    assert float(p(0.0)) == pytest.approx(1.0)
    assert float(p(0.5)) == pytest.approx(0.0, abs=1e-15)
    assert p.mass == pytest.approx(0.25)


def test_linear_supercritical_shape():
    p = ProfileSpec.linear(2.0, 1.0)
    r = np.linspace(0, 1, 11)
    assert np.allclose(p(r), 3.0 - 2.0 * r)
    assert p.edge is None
    assert linear_intercept(2.0, 1.0) == pytest.approx(3.0)


def test_linear_continuous_at_j():
    r = np.linspace(0, 1, 101)
    below = ProfileSpec.linear(1.0 - 1e-12, 1.0)(r)
    at = ProfileSpec.linear(1.0, 1.0)(r)
    assert np.max(np.abs(below - at)) < 1e-5
    assert linear_edge(1.0, 1.0) == pytest.approx(1.0)


def test_suffix_mass_and_json_roundtrip():
    p = ProfileSpec.table([0.0, 0.5, 1.0], [2.0, 1.0, 0.0])
    assert p.mass == pytest.approx(1.0)
    assert float(p.suffix_mass(0.5)) == pytest.approx(0.25)
    q = ProfileSpec.from_json(p.to_json())
    assert q.mass == pytest.approx(p.mass)


def test_from_json_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ProfileSpec.from_json({"kind": "wavy"})
