"""Kernel models: closed forms, series orthonormalization, norms,
projections, Toeplitz forms, ensembles."""

import math

import numpy as np
import pytest
from scipy.special import beta

import bergmanlab.geometry as geo
import bergmanlab.kernels as ker
from bergmanlab.util import GramIllConditioned, SchemaError, make_rng


def test_space_params_validation():
    p = ker.SpaceParams(p=2.0, alpha=0.5)
    assert p.conjugate == 2.0
    assert ker.SpaceParams(p=4.0, alpha=0.0).conjugate == pytest.approx(4 / 3)
    assert ker.SpaceParams(p=math.inf, alpha=0.0).conjugate == 1.0
    assert ker.SpaceParams(p=1.0, alpha=0.0).conjugate == math.inf
    with pytest.raises(SchemaError):
        ker.SpaceParams(p=0.5, alpha=0.0)
    with pytest.raises(SchemaError):
        ker.SpaceParams(p=2.0, alpha=-1.0)


def test_monomial_norm2_beta_identity(disc, ball):
    ks = np.arange(0, 30)
    for alpha in (0.0, 1.0, 2.5):
        got = ker.monomial_norm2(disc, ks, alpha)
        want = math.pi * beta(ks + 1, alpha + 1)
        assert np.allclose(got, want, rtol=1e-12)
    # ball: ||z1^a z2^b||^2 = pi^2 a! b! G(alpha+1) / G(a+b+alpha+3)
    exps = np.array([[0, 0], [1, 0], [2, 3]])
    got = ker.monomial_norm2(ball, exps, 1.0)
    from scipy.special import gamma
    want = [math.pi ** 2 * gamma(a + 1) * gamma(b + 1) * gamma(2.0)
            / gamma(a + b + 4.0) for a, b in exps]
    assert np.allclose(got, want, rtol=1e-12)


def test_closed_kernel_disc_formula(disc):
    for alpha in (0.0, 1.0):
        m = ker.closed_kernel(disc, alpha)
        z, w = 0.3 + 0.2j, -0.1 + 0.5j
        want = (alpha + 1) / math.pi * (1 - z * np.conj(w)) ** (-(alpha + 2))
        assert m.evaluate(z, w) == pytest.approx(want, rel=1e-14)


def test_closed_kernel_ball_formula(ball):
    m = ker.closed_kernel(ball, 0.0)
    z = np.array([0.3 + 0.1j, -0.2j])
    w = np.array([0.1, 0.4 + 0.2j])
    ip = np.sum(z * np.conj(w))
    want = 2.0 / math.pi ** 2 * (1 - ip) ** (-3.0)
    assert m.evaluate(z, w) == pytest.approx(want, rel=1e-14)


def test_series_matches_closed_disc(disc):
    # tail of the power series at |z w| <= 0.64 is far below 1e-8 by deg 80
    zs = np.array([0.8, 0.5 + 0.6j, -0.7 - 0.2j, 0.1j])
    for alpha in (0.0, 1.0):
        closed = ker.closed_kernel(disc, alpha)
        series = ker.build_series_kernel(disc, alpha, degree=80)
        for z in zs:
            gap = np.abs(series.evaluate(z, zs) - closed.evaluate(z, zs))
            assert float(np.max(gap)) < 1e-8


def test_series_matches_closed_ball(ball):
    closed = ker.closed_kernel(ball, 0.0)
    series = ker.build_series_kernel(ball, 0.0, degree=30)
    zs = [np.array([0.5, 0.3j]), np.array([0.0 + 0.0j, -0.6]),
          np.array([0.4 + 0.4j, 0.1])]
    for z in zs:
        for w in zs:
            gap = abs(complex(series.evaluate(z, w))
                      - complex(closed.evaluate(z, w)))
            assert gap < 1e-6


def test_series_user_quadrature_underresolved(disc):
    quad = geo.make_quadrature(disc, scheme="monte-carlo", resolution=5,
                               seed=7)
    with pytest.raises(SchemaError, match="under-resolved"):
        ker.build_series_kernel(disc, 0.0, degree=40, quad=quad)


def test_gram_ill_conditioned_refusal():
    sq = geo.custom_domain(
        lambda z: np.maximum(np.abs(np.real(z)), np.abs(np.imag(z))) - 1.0,
        bounding_radius=1.5)
    with pytest.raises(GramIllConditioned) as exc:
        ker.build_series_kernel(sq, 0.0, degree=48, check_resolution=False)
    w = exc.value.witness
    assert w["degree"] == 48 and w["condition"] > 1e8


def test_reproducing_property(disc):
    alpha = 1.0
    model = ker.closed_kernel(disc, alpha)
    quad = geo.make_quadrature(disc, scheme="polar", alpha_hint=alpha,
                               n_radial=256, n_angular=256)
    rng = make_rng(11, "repro")
    c = rng.normal(size=13) + 1j * rng.normal(size=13)

    def f(z):
        return np.polyval(c[::-1], np.asarray(z, dtype=complex))

    wts = quad.weights * np.abs(disc.rho_at(quad.points)) ** alpha
    fv = f(quad.points)
    norm = math.sqrt(float(np.sum(wts * np.abs(fv) ** 2)))
    for z in (0.0, 0.5 + 0.3j, -0.85j):
        got = complex(np.sum(wts * fv * model.evaluate(z, quad.points)))
        assert abs(got - complex(f(z))) < 1e-8 * norm


def test_radial_norm_integral_log_closed_form():
    # hyp2f1(1, 1, 1, x) = 1/(1-x) so the s=1, alpha=0 integral is
    # -(pi/t^2) log(1 - t^2)
    for t in (0.3, 0.7, 0.9):
        got = ker.radial_norm_integral(t, 1.0, 0.0)
        want = -math.pi / t ** 2 * math.log(1 - t ** 2)
        assert got == pytest.approx(want, rel=1e-9)


def test_kernel_norm_p2_equals_sqrt_diagonal(disc, ball):
    for alpha in (0.0, 1.5):
        m = ker.closed_kernel(disc, alpha)
        for z in (0.0, 0.4 - 0.3j, 0.9):
            got = ker.kernel_norm(m, z, 2.0)
            assert got == pytest.approx(math.sqrt(float(m.diagonal(z))),
                                        rel=1e-9)
    mb = ker.closed_kernel(ball, 0.0)
    z = np.array([0.5, 0.3j])
    assert ker.kernel_norm(mb, z, 2.0) == pytest.approx(
        math.sqrt(float(mb.diagonal(z))), rel=1e-7)


def test_kernel_norm_sup(disc):
    m = ker.closed_kernel(disc, 0.0)
    z = 0.6 + 0.0j
    got = ker.kernel_norm(m, z, math.inf)
    want = 1.0 / math.pi * (1 - 0.6) ** -2
    assert got == pytest.approx(want, rel=1e-6)


def test_kernel_norm_series_close_to_closed(disc):
    closed = ker.closed_kernel(disc, 0.0)
    series = ker.build_series_kernel(disc, 0.0, degree=80)
    for z in (0.2, 0.5 + 0.2j):
        a = ker.kernel_norm(closed, z, 2.0)
        b = ker.kernel_norm(series, z, 2.0)
        assert b == pytest.approx(a, rel=1e-6)


def test_kernel_norm_rejects_bad_args(disc):
    m = ker.closed_kernel(disc, 0.0)
    with pytest.raises(SchemaError):
        ker.kernel_norm(m, 0.1, 0.5)
    with pytest.raises(SchemaError):
        ker.kernel_norm(m, 0.1, 2.0, alpha=1.0)


def test_normalized_kernel_unit_norm(disc):
    m = ker.closed_kernel(disc, 1.0)
    for p in (1.0, 2.0, 4.0):
        k = ker.normalized_kernel(m, 0.5, p)
        quad = geo.make_quadrature(disc, scheme="polar", alpha_hint=1.0,
                                   n_radial=256, n_angular=128)
        wts = quad.weights * np.abs(disc.rho_at(quad.points))
        val = float(np.sum(wts * np.abs(k(quad.points)) ** p)) ** (1 / p)
        assert val == pytest.approx(1.0, abs=1e-6)


def test_bergman_project_fixes_polynomials(disc_kernel1):
    c = np.array([1.0, -2.0 + 1j, 0.5j, 3.0])

    def f(z):
        return np.polyval(c[::-1], np.asarray(z, dtype=complex))

    proj = ker.bergman_project(disc_kernel1, f)
    zs = np.array([0.1, 0.5 - 0.3j, -0.8j])
    assert np.allclose(proj(zs), f(zs), atol=1e-9)
    again = ker.bergman_project(disc_kernel1, proj)
    assert np.allclose(again(zs), proj(zs), atol=1e-9)


def test_bergman_project_kills_antiholomorphic(disc_kernel0):
    proj = ker.bergman_project(disc_kernel0, lambda z: np.conj(z))
    zs = np.array([0.3, 0.2 + 0.4j])
    assert np.max(np.abs(proj(zs))) < 1e-10


def test_toeplitz_quadratic_form_identity_symbol(disc):
    for alpha, k in ((0.0, 3), (2.0, 5)):
        m = ker.closed_kernel(disc, alpha)
        got = ker.toeplitz_quadratic_form(m, lambda z: np.ones(len(z)),
                                          lambda z: np.asarray(z) ** k)
        want = math.pi * beta(k + 1, alpha + 1)
        assert got == pytest.approx(float(want), rel=1e-9)


def test_toeplitz_rejects_signed_symbol(disc_kernel0):
    with pytest.raises(SchemaError):
        ker.toeplitz_quadratic_form(disc_kernel0,
                                    lambda z: np.real(z),
                                    lambda z: np.ones_like(z))


def test_ensemble_determinism_and_kinds(disc):
    zs = np.array([0.2, -0.5 + 0.3j, 0.7j])
    a = ker.build_ensemble(disc, ["poly", "blaschke"], degree=12, count=6,
                           seed=99)
    b = ker.build_ensemble(disc, ["poly", "blaschke"], degree=12, count=6,
                           seed=99)
    c = ker.build_ensemble(disc, ["poly", "blaschke"], degree=12, count=6,
                           seed=100)
    assert len(a) == 6
    assert [m.kind for m in a] == ["poly", "blaschke"] * 3
    for ma, mb in zip(a, b):
        assert ma.label == mb.label
        assert np.array_equal(ma(zs), mb(zs))
    assert not np.array_equal(list(a)[0](zs), list(c)[0](zs))


def test_ensemble_blaschke_bounded(disc):
    ens = ker.build_ensemble(disc, ["blaschke"], degree=16, count=3, seed=4)
    pts = geo.unit_disc()
    rng = make_rng(5, "pts")
    zs = 0.99 * np.sqrt(rng.uniform(0, 1, 200)) \
        * np.exp(2j * math.pi * rng.uniform(0, 1, 200))
    for m in ens:
        assert float(np.max(np.abs(m(zs)))) <= 1.0 + 1e-9


def test_ensemble_kernel_sum_concentrates(disc):
    anchor = 0.97
    lo = ker.build_ensemble(disc, ["kernel-sum"], degree=10, count=1,
                            seed=1, alpha=0.0, anchors=[anchor])
    hi = ker.build_ensemble(disc, ["kernel-sum"], degree=60, count=1,
                            seed=1, alpha=0.0, anchors=[anchor])
    at_anchor_lo = abs(complex(list(lo)[0](np.array([anchor]))[0]))
    at_anchor_hi = abs(complex(list(hi)[0](np.array([anchor]))[0]))
    assert at_anchor_hi > 2 * at_anchor_lo
    far_hi = abs(complex(list(hi)[0](np.array([-0.9]))[0]))
    assert at_anchor_hi > 10 * far_hi


def test_ensemble_rejects_unknown_kind(disc):
    with pytest.raises(SchemaError):
        ker.build_ensemble(disc, ["spline"], degree=4, count=1, seed=0)
    ball = geo.unit_ball()
    with pytest.raises(SchemaError):
        ker.build_ensemble(ball, ["blaschke"], degree=4, count=1, seed=0)
