"""Hyperboloid-model geometry: charts, distances, isometries."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperdrum.formats import parse_manifold
from hyperdrum.geometry import (ETA, GeometryError, HPoint, Isometry, apply,
                                apply_many, compose, distance, distance_many,
                                displacement, from_klein, from_poincare,
                                from_spherical, identity, inverse, mdot,
                                origin, to_klein, to_poincare, to_spherical)

from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "hyperdrum" / "data"

finite_rho = st.floats(0.0, 8.0)
angle_theta = st.floats(0.0, np.pi)
angle_phi = st.floats(0.0, 2 * np.pi, exclude_max=True)

point = st.builds(from_spherical, st.floats(0.01, 8.0), angle_theta,
                  angle_phi)


def weeks_gens():
    return parse_manifold(DATA / "weeks.mfd").gens


def test_origin_is_the_basepoint():
    assert np.allclose(origin().x, [1.0, 0.0, 0.0, 0.0])
    assert distance(origin(), origin()) == 0.0


def test_point_must_sit_on_the_hyperboloid():
    with pytest.raises(GeometryError):
        HPoint([1.0, 0.5, 0.0, 0.0])
    with pytest.raises(GeometryError):
        HPoint([-1.0, 0.0, 0.0, 0.0])    # lower sheet


@settings(max_examples=60, deadline=None)
@given(finite_rho, angle_theta, angle_phi)
def test_spherical_roundtrip(rho, theta, phi):
    p = from_spherical(rho, theta, phi)
    r2, t2, p2 = to_spherical(p)
    assert r2 == pytest.approx(rho, abs=1e-9)
    if rho > 1e-6 and 1e-6 < theta < np.pi - 1e-6:
        assert t2 == pytest.approx(theta, abs=1e-7)
        assert np.cos(p2 - phi) == pytest.approx(1.0, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(point)
def test_klein_and_poincare_roundtrip(p):
    assert distance(from_klein(*to_klein(p)), p) < 1e-7
    assert distance(from_poincare(*to_poincare(p)), p) < 1e-7


def test_poincare_radius_is_tanh_half():
    p = from_spherical(2.0, 0.5, 1.0)
    assert np.hypot(*to_poincare(p)[:2]) <= 1.0
    assert np.linalg.norm(to_poincare(p)) == pytest.approx(np.tanh(1.0))
    assert np.linalg.norm(to_klein(p)) == pytest.approx(np.tanh(2.0))


def test_charts_reject_exterior_points():
    with pytest.raises(GeometryError):
        from_klein(0.8, 0.8, 0.0)
    with pytest.raises(GeometryError):
        from_poincare(1.0, 0.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(point, point)
def test_distance_symmetric_positive(p, q):
    d = distance(p, q)
    assert d >= 0.0
    assert d == pytest.approx(distance(q, p), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(point, point, point)
def test_triangle_inequality(p, q, r):
    assert distance(p, r) <= distance(p, q) + distance(q, r) + 1e-9


def test_distance_along_a_ray_is_the_parameter():
    a = from_spherical(1.25, 0.7, 0.3)
    b = from_spherical(3.25, 0.7, 0.3)
    assert distance(a, b) == pytest.approx(2.0, abs=1e-12)


def test_distance_many_matches_scalar():
    pts = np.array([from_spherical(r, 1.0, 2.0).x for r in (0.5, 1.0, 2.0)])
    qts = np.array([from_spherical(r, 0.3, 0.1).x for r in (1.5, 2.5, 0.2)])
    want = [distance(HPoint(p), HPoint(q)) for p, q in zip(pts, qts)]
    assert np.allclose(distance_many(pts, qts), want)


def test_isometry_must_be_lorentz():
    bad = np.eye(4)
    bad[1, 2] = 0.1
    with pytest.raises(GeometryError):
        Isometry(bad)


def test_group_operations():
    g = weeks_gens().elements[0]
    h = weeks_gens().elements[1]
    p = from_spherical(0.8, 1.1, 0.4)
    assert distance(apply(compose(g, h), p), apply(g, apply(h, p))) < 1e-9
    assert distance(apply(compose(g, inverse(g)), p), p) < 1e-9
    assert np.abs(mdot(apply(g, p).x, apply(g, p).x) - 1.0) < 1e-9


@settings(max_examples=30, deadline=None)
@given(point, point, st.integers(0, 5))
def test_isometries_preserve_distance(p, q, i):
    gens = weeks_gens()
    g = gens.elements[i % len(gens.elements)]
    assert distance(apply(g, p), apply(g, q)) == pytest.approx(
        distance(p, q), abs=1e-8)


def test_apply_many_matches_apply():
    g = weeks_gens().elements[2]
    pts = np.array([from_spherical(r, r, r).x for r in (0.3, 1.0, 2.2)])
    moved = apply_many(g, pts)
    for row, p in zip(moved, pts):
        assert distance(HPoint(row), apply(g, HPoint(p))) < 1e-10


def test_displacement_is_translation_length_at_origin():
    g = weeks_gens().elements[0]
    assert displacement(g) == pytest.approx(
        distance(origin(), apply(g, origin())), abs=1e-12)
    assert displacement(identity()) == 0.0


def test_compose_controls_drift():
    # long words stay Lorentz thanks to re-orthonormalization
    g = weeks_gens().elements[0]
    h = weeks_gens().elements[3]
    w = identity()
    for _ in range(40):
        w = compose(compose(w, g), h)
    defect = w.matrix.T @ ETA @ w.matrix - ETA
    assert np.abs(defect).max() < 1e-10
