"""Geometry layer: invariant distances, balls, frames, quadratures, covers.

Oracles are closed forms of the disc model (Mobius invariance, exact ball
shapes) and brute-force comparisons for the two-dimensional ball.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bergmanlab.geometry as geo
from bergmanlab.util import BudgetError


def _mobius(a, z):
    return (a - z) / (1 - np.conj(a) * z)


def _disc_rho(z):
    return abs(z) ** 2 - 1


# -- distances ---------------------------------------------------------------

def test_disc_distance_closed_form(disc):
    z, w = 0.3 + 0.2j, -0.5 + 0.1j
    expect = math.atanh(abs(_mobius(z, w)))
    got = float(geo.exact_distance(disc, z, w))
    assert abs(got - expect) < 1e-14


def test_disc_distance_mobius_invariance(disc):
    rng = np.random.default_rng(7)
    for _ in range(25):
        z, w, a = (rng.uniform(-0.7, 0.7, 2).view(complex)[0]
                   for _ in range(3))
        d0 = float(geo.exact_distance(disc, z, w))
        d1 = float(geo.exact_distance(disc, _mobius(a, z), _mobius(a, w)))
        assert abs(d0 - d1) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_distance_symmetry_and_triangle(seed):
    disc = geo.unit_disc()
    rng = np.random.default_rng(seed)
    z, w, v = (0.85 * math.sqrt(rng.uniform()) * np.exp(2j * math.pi
               * rng.uniform()) for _ in range(3))
    dzw = float(geo.exact_distance(disc, z, w))
    dwz = float(geo.exact_distance(disc, w, z))
    dzv = float(geo.exact_distance(disc, z, v))
    dvw = float(geo.exact_distance(disc, v, w))
    assert abs(dzw - dwz) < 1e-12
    assert dzw <= dzv + dvw + 1e-12


def test_kobayashi_distance_band_disc_exact(disc):
    band = geo.kobayashi_distance(disc, 0.2, 0.5j)
    assert band.exact
    assert abs(band.mid - math.atanh(abs(_mobius(0.2, 0.5j)))) < 1e-12


def test_ball_distance_vs_automorphism_free_pairs(ball):
    # at the origin the Kobayashi distance is atanh|z|
    z = np.array([0.3, 0.4])
    band = geo.kobayashi_distance(ball, np.array([0.0, 0.0]), z)
    assert band.lo <= math.atanh(0.5) + 1e-9
    assert band.hi >= math.atanh(0.5) - 1e-9


# -- balls -------------------------------------------------------------------

def test_disc_ball_euclidean_shape(disc):
    z, r = 0.4 + 0.1j, 0.5
    ballY = geo.kobayashi_ball(disc, z, r)
    t = abs(z)
    expect_radius = r * (1 - t ** 2) / (1 - (r * t) ** 2)
    assert abs(ballY.euclid_radius - expect_radius) < 1e-14
    # exact area of the pseudo-hyperbolic disc
    vol, err = ballY.volume_with_error()
    assert err == 0.0
    assert abs(vol - math.pi * expect_radius ** 2) < 1e-14


def test_disc_ball_membership_matches_distance(disc):
    z, r = 0.2 - 0.3j, 0.45
    rng = np.random.default_rng(3)
    pts = 0.95 * np.sqrt(rng.uniform(size=200)) * np.exp(
        2j * math.pi * rng.uniform(size=200))
    ballY = geo.kobayashi_ball(disc, z, r)
    inside = ballY.membership(pts) > 0
    d = np.abs(_mobius(z, pts))
    assert np.array_equal(inside, d < r)


def test_ball_volume_origin_exact(ball):
    # Y(0, r) = ball of radius r: |Y| = pi^2/2 r^4
    b = geo.kobayashi_ball(ball, np.array([0.0, 0.0]), 0.6)
    vol, err = b.volume_with_error()
    assert err == 0.0
    assert abs(vol - math.pi ** 2 / 2 * 0.6 ** 4) < 1e-12


def test_ball_volume_off_center_vs_mc(ball):
    center = np.array([0.5, 0.2])
    b = geo.kobayashi_ball(ball, center, 0.4)
    vol, err = b.volume_with_error()
    # brute-force Monte Carlo over the bounding box of the exact axes
    rng = np.random.default_rng(11)
    n = 200000
    lo = np.asarray(b.euclid_center).view(float) - 1.2 * np.repeat(b.axes, 2)
    hi = np.asarray(b.euclid_center).view(float) + 1.2 * np.repeat(b.axes, 2)
    pts = rng.uniform(lo, hi, size=(n, 4)).view(complex)
    inside = b.membership(pts) > 0
    box = float(np.prod(hi - lo))
    brute = box * np.mean(inside)
    stderr = box * np.std(inside.astype(float)) / math.sqrt(n)
    assert abs(vol - brute) < 5 * (stderr + err + 1e-12)


def test_volume_law_slopes_disc(disc):
    # |Y(z, r)| ~ delta(z)^(n+1) at fixed r and ~ r^(2n) at fixed z
    deltas = np.array([0.05, 0.02, 0.01, 0.005, 0.002])
    vols = [geo.kobayashi_ball(disc, 1 - d, 0.4).volume for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(vols), 1)[0]
    assert abs(slope - 2.0) < 0.1
    rs = np.array([0.05, 0.1, 0.2, 0.3])
    vols = [geo.kobayashi_ball(disc, 0.6, r).volume for r in rs]
    slope = np.polyfit(np.log(rs), np.log(vols), 1)[0]
    assert abs(slope - 2.0) < 0.2


def test_volume_law_slopes_ball(ball):
    deltas = np.array([0.05, 0.02, 0.01, 0.005])
    zs = [np.array([1 - d, 0.0]) for d in deltas]
    vols = [geo.kobayashi_ball(ball, z, 0.4).volume for z in zs]
    slope = np.polyfit(np.log(deltas), np.log(vols), 1)[0]
    assert abs(slope - 3.0) < 0.15
    rs = np.array([0.1, 0.2, 0.3, 0.4])
    vols = [geo.kobayashi_ball(ball, np.array([0.5, 0.1]), r).volume
            for r in rs]
    slope = np.polyfit(np.log(rs), np.log(vols), 1)[0]
    assert abs(slope - 4.0) < 0.4


# -- polydisc frames ---------------------------------------------------------

def test_polydisc_sandwich_disc(disc):
    z, r = 0.7, 0.4
    frame = geo.polydisc_frame(disc, z, r)
    ballY = geo.kobayashi_ball(disc, z, r)
    rng = np.random.default_rng(5)
    # inner polydisc points stay inside the ball
    u = frame.inner[0] * np.sqrt(rng.uniform(size=200)) * np.exp(
        2j * math.pi * rng.uniform(size=200))
    assert np.all(ballY.membership(z + u) > 0)
    # ball samples stay inside the outer polydisc
    pts = ballY.sample(200, seed=9)
    assert np.all(np.abs(pts - z) <= frame.outer[0] + 1e-9)


def test_polydisc_sandwich_ball(ball):
    w = np.array([0.6, 0.1])
    frame = geo.polydisc_frame(ball, w, 0.4)
    ballY = geo.kobayashi_ball(ball, w, 0.4)
    pts = ballY.sample(300, seed=41)
    u = (pts - w) @ frame.U.T.conj()
    assert np.all(np.abs(u[:, 0]) <= frame.outer[0] * (1 + 1e-6))
    assert np.all(np.abs(u[:, 1]) <= frame.outer[1] * (1 + 1e-6))
    assert frame.inner[0] <= frame.outer[0]
    assert frame.inner[1] <= frame.outer[1]


def test_frame_constants_monotone_in_r(disc):
    a1, b1 = geo.frame_constants(disc, 0.3)[:2]
    a2, b2 = geo.frame_constants(disc, 0.6)[:2]
    assert a1 <= a2 + 1e-12 and b1 <= b2 + 1e-12


def test_delta_comparability(disc, ball):
    for dom, r in ((disc, 0.5), (ball, 0.5)):
        ratio = geo.delta_comparability(dom, r)
        assert 1.0 <= ratio < 50.0


# -- quadratures -------------------------------------------------------------

def test_polar_quadrature_moments(disc):
    # integral of |z|^(2k) (1-|z|^2)^alpha dA = pi * B(k+1, alpha+1)
    from scipy.special import beta
    for alpha in (0.0, 1.0, 2.5):
        quad = geo.make_quadrature(disc, scheme="polar", alpha_hint=alpha)
        w = quad.weights * (1 - np.abs(quad.points) ** 2) ** alpha
        for k in (0, 3, 10):
            got = float(np.sum(w * np.abs(quad.points) ** (2 * k)))
            assert abs(got - math.pi * beta(k + 1, alpha + 1)) < 1e-10


def test_graded_polar_total_mass(disc):
    quad = geo.graded_polar_quadrature()
    assert abs(float(np.sum(quad.weights)) - math.pi) < 1e-6
    got = float(np.sum(quad.weights * (1 - np.abs(quad.points) ** 2) ** 3))
    assert abs(got - math.pi / 4) < 1e-6


def test_duffy_quadrature_ball_volume(ball):
    quad = geo.make_quadrature(ball, scheme="duffy")
    assert abs(float(np.sum(quad.weights)) - math.pi ** 2 / 2) < 1e-8


def test_tensor_and_mc_schemes(disc):
    t = geo.make_quadrature(disc, scheme="tensor", resolution=8)
    assert abs(float(np.sum(t.weights)) - math.pi) < 0.01
    m = geo.make_quadrature(disc, scheme="monte-carlo", resolution=8, seed=4)
    assert abs(float(np.sum(m.weights)) - math.pi) < 0.05
    m2 = geo.make_quadrature(disc, scheme="monte-carlo", resolution=8, seed=4)
    assert np.array_equal(m.points, m2.points)


def test_unknown_scheme_rejected(disc):
    with pytest.raises(ValueError):
        geo.make_quadrature(disc, scheme="simpson")


def test_custom_domain_volume_too_coarse():
    dom = geo.custom_domain(lambda z: np.abs(z) ** 2 - 1.0,
                            bounding_radius=1.5)
    quad = geo.make_quadrature(dom, scheme="monte-carlo", resolution=2)
    with pytest.raises(geo.QuadratureTooCoarse):
        geo.ball_volume(dom, 0.95 + 0j, 0.2, quad=quad)
    vol, err = geo.ball_volume(geo.unit_disc(), 0.5 + 0j, 0.4)
    assert err == 0.0 and vol > 0


# -- covers, lattices, selection ---------------------------------------------

def test_cover_disc_covered_and_bounded_overlap(disc):
    cover = geo.cover_domain(disc, r=0.5, R=0.7, delta_min=0.05)
    assert cover.covered
    assert 1 <= cover.overlap <= 60
    cover2 = geo.cover_domain(disc, r=0.9, R=0.95, delta_min=0.05)
    assert cover2.covered


def test_cover_budget(disc):
    with pytest.raises(BudgetError):
        geo.cover_domain(disc, r=0.5, R=0.7, delta_min=1e-4, max_centers=50)


def test_hyperbolic_lattice_deterministic(disc, ball):
    a = geo.hyperbolic_lattice(disc, 0.3, delta_min=0.02)
    b = geo.hyperbolic_lattice(disc, 0.3, delta_min=0.02)
    assert np.array_equal(a, b)
    fine = geo.hyperbolic_lattice(disc, 0.15, delta_min=0.02)
    assert len(fine) > len(a)
    pts = geo.hyperbolic_lattice(ball, 0.5, delta_min=0.1)
    assert len(pts) > 4


def test_vitali_selection_disjoint(disc):
    pts = geo.hyperbolic_lattice(disc, 0.2, delta_min=0.05)
    keep = geo.vitali_select(disc, pts, r=0.17, R=0.7)
    kept = pts[keep]
    d = np.abs(_mobius(kept[:, None], kept[None, :]))
    np.fill_diagonal(d, 1.0)
    assert float(np.min(d)) >= math.tanh(2 * math.atanh(0.17)) - 1e-9


def test_collar_points_depths(disc):
    pts = geo.collar_points(disc, [0.5, 0.1, 0.01], rays=8, seed=0)
    pts = np.asarray(pts)
    deltas = 1 - np.abs(pts)
    for d in (0.5, 0.1, 0.01):
        assert np.any(np.abs(deltas - d) < 1e-9)
