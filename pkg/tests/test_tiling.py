"""Group enumeration, Dirichlet domains, Monte Carlo geometry."""

from pathlib import Path

import numpy as np
import pytest

from hyperdrum.formats import parse_manifold
from hyperdrum.geometry import (HPoint, apply, distance, from_spherical,
                                inverse, origin)
from hyperdrum.tiling import (TilingError, circle_points, domain_volume_mc,
                              enumerate_elements, enumerate_images,
                              estimate_diameter, images_from_ball,
                              in_dirichlet_domain, in_domain_many,
                              matched_circle, membership_orbit,
                              out_radius_estimate, sample_domain_points)

DATA = Path(__file__).resolve().parents[1] / "src" / "hyperdrum" / "data"

WEEKS_VOLUME = 0.9427


@pytest.fixture(scope="module")
def weeks():
    return parse_manifold(DATA / "weeks.mfd")


@pytest.fixture(scope="module")
def orbit(weeks):
    return membership_orbit(weeks.gens)


def test_generator_set_closed_under_inverse(weeks):
    gens = weeks.gens
    p = from_spherical(0.37, 1.0, 2.0)
    for i, g in enumerate(gens.elements):
        j = gens.inverse_index[i]
        assert distance(apply(gens.elements[j], apply(g, p)), p) < 1e-8


def test_ball_radius_covers_the_request(weeks):
    ball = enumerate_elements(weeks.gens, 2.0)
    assert ball.radius >= 2.0
    disp = [distance(origin(), apply(g, origin())) for g in ball.orbit()]
    assert max(disp) <= ball.radius + 1e-9
    # identity excluded, every listed element genuinely moves the origin
    assert min(disp) > 0.5


def test_ball_grows_like_the_volume(weeks):
    small = enumerate_elements(weeks.gens, 1.5)
    big = enumerate_elements(weeks.gens, 2.5)
    assert len(big.mats) > len(small.mats) >= 2


def test_images_lie_in_the_shell_at_right_distances(weeks):
    ball = enumerate_elements(weeks.gens, 3.0)
    p = from_spherical(0.2, 0.7, 0.7)
    ims = images_from_ball(p, ball, 1.0, 3.0)
    assert len(ims.points) > 0
    d = np.arccosh(np.clip(ims.points[:, 0] * p.x[0]
                           - ims.points[:, 1:] @ p.x[1:], 1.0, None))
    assert np.all(d >= 1.0 - 1e-9) and np.all(d <= 3.0 + 1e-9)
    assert np.allclose(ims.radii, np.arccosh(ims.points[:, 0]))
    assert enumerate_images(p, weeks.gens, 1.0, 3.0).points.shape \
        == ims.points.shape


def test_origin_is_interior(orbit):
    assert in_dirichlet_domain(origin(), orbit)
    far = from_spherical(3.0, 1.0, 1.0)
    assert not in_dirichlet_domain(far, orbit)


def test_in_domain_many_matches_scalar(weeks, orbit):
    rng = np.random.default_rng(3)
    rho = rng.uniform(0.05, 1.2, size=40)
    th = np.arccos(rng.uniform(-1, 1, size=40))
    ph = rng.uniform(0, 2 * np.pi, size=40)
    pts = np.array([from_spherical(r, t, p).x for r, t, p in zip(rho, th, ph)])
    flags = in_domain_many(pts, orbit)
    want = [in_dirichlet_domain(HPoint(p), orbit) for p in pts]
    assert flags.tolist() == want
    assert 0 < flags.sum() < 40


def test_out_radius_bounds_the_domain(weeks, orbit):
    r_out = out_radius_estimate(weeks.gens)
    # sampled interior points stay inside the estimated circumradius
    pts = sample_domain_points(200, weeks.gens, seed=11)
    assert np.arccosh(pts[:, 0]).max() <= r_out + 1e-6
    assert r_out < 1.2  # Weeks domain is small


def test_sample_points_deterministic_and_prefix_stable(weeks):
    a = sample_domain_points(50, weeks.gens, seed=4)
    b = sample_domain_points(50, weeks.gens, seed=4)
    c = sample_domain_points(80, weeks.gens, seed=4)
    assert np.array_equal(a, b)
    assert np.array_equal(c[:50], a)
    assert not np.array_equal(sample_domain_points(50, weeks.gens, seed=5), a)


def test_sampled_points_are_interior(weeks, orbit):
    pts = sample_domain_points(300, weeks.gens, seed=1)
    assert in_domain_many(pts, orbit).all()


def test_volume_mc_matches_weeks(weeks):
    vol, err = domain_volume_mc(weeks.gens, 200000, seed=2)
    assert err < 0.02
    assert abs(vol - WEEKS_VOLUME) < 3.0 * err


def test_volume_mc_rejects_tiny_n(weeks):
    with pytest.raises(TilingError):
        domain_volume_mc(weeks.gens, 100, seed=0)


def test_diameter_estimate_consistent(weeks):
    d = estimate_diameter(weeks.gens, 3000, seed=0)
    # bracketed by the in-radius scale and the metadata value 0.843
    assert 0.5 < d <= 0.9
    assert estimate_diameter(weeks.gens, 3000, seed=0) == d


def test_matched_circle_geometry(weeks):
    g = weeks.gens.elements[0]
    rho = 1.0
    alpha, front, back = matched_circle(g, rho)
    assert 0.0 < alpha < np.pi / 2
    pts = circle_points(g, rho, 64)
    assert pts.shape == (64, 4)
    # points sit on the rho-sphere and map onto the back circle's sphere
    assert np.allclose(np.arccosh(pts[:, 0]), rho, atol=1e-9)
    moved = pts @ g.matrix.T
    assert np.allclose(np.arccosh(moved[:, 0]), rho, atol=1e-9)


def test_matched_circle_needs_intersection(weeks):
    g = weeks.gens.elements[0]
    with pytest.raises(TilingError):
        matched_circle(g, 0.05)
