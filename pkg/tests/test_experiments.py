"""Sampling constructions, Carleson scans, domination constants, zero
counting, sublevel decay, lower-dimensional density checks."""

import math

import numpy as np
import pytest

import bergmanlab.density as dens
import bergmanlab.experiments as ex
import bergmanlab.geometry as geo
import bergmanlab.kernels as ker
from bergmanlab.util import InvariantFailure, SchemaError


@pytest.fixture(scope="module")
def ens20(disc):
    return ker.build_ensemble(disc, ["poly", "blaschke"], degree=20,
                              count=8, seed=42)


@pytest.fixture(scope="module")
def lattice02(disc):
    return geo.hyperbolic_lattice(disc, 0.2, delta_min=0.01)


def test_discrete_measure_validation(disc):
    with pytest.raises(SchemaError):
        ex.DiscreteMeasure(disc, np.array([0.1, 0.2]), np.array([1.0]))
    with pytest.raises(SchemaError):
        ex.DiscreteMeasure(disc, np.array([0.1]), np.array([-1.0]))
    mu = ex.DiscreteMeasure(disc, np.array([0.1, 0.5]),
                            np.array([2.0, 3.0]))
    assert len(mu) == 2 and mu.total() == 5.0
    assert mu.ball_mass(0.1, 0.1) == 2.0
    assert mu.pnorm_sum(lambda z: np.asarray(z), 2.0) \
        == pytest.approx(2 * 0.01 + 3 * 0.25)
    thin = mu.thinned(2)
    assert len(thin) == 1 and thin.provenance["thinning_step"] == 2


def test_calibration_header_cached(disc):
    a = ex.calibration_header(disc, 2.0, 0.0)
    b = ex.calibration_header(disc, 2.0, 0.0)
    assert a == b
    assert a["C_eps"] >= 1 and a["M"] >= 1
    assert a["K"] == 2.0 and a["q"] == 1.0


def test_domination_full_region_is_identity(disc, ens20):
    rec = ex.domination_constant(disc, dens.full_region(disc), 2.0, 0.0,
                                 ens20)
    assert rec.sup == pytest.approx(1.0, abs=1e-12)


def test_domination_annulus_stable_and_shrinkage(disc):
    ann = dens.annulus_region(disc, r0=0.5)
    sups = {}
    for deg in (30, 50):
        e = ker.build_ensemble(disc, ["poly", "kernel-sum"], degree=deg,
                               count=10, seed=7)
        sups[deg] = ex.domination_constant(disc, ann, 2.0, 0.0, e).sup
    assert abs(sups[50] - sups[30]) / sups[30] < 0.10
    e30 = ker.build_ensemble(disc, ["poly", "kernel-sum"], degree=30,
                             count=10, seed=7)
    smaller = dens.annulus_region(disc, r0=0.6)
    c_big = ex.domination_constant(disc, ann, 2.0, 0.0, e30).sup
    c_small = ex.domination_constant(disc, smaller, 2.0, 0.0, e30).sup
    assert c_small >= c_big - 1e-12


def test_domination_halfplane_grows_with_degree(disc):
    half = dens.halfplane_region(disc, angle=0.0)
    anchors = [0.95 * np.exp(1j * math.pi)]
    sups = []
    for deg in (10, 25, 50):
        e = ker.build_ensemble(disc, ["kernel-sum"], degree=deg, count=6,
                               seed=11, anchors=anchors)
        sups.append(ex.domination_constant(disc, half, 2.0, 0.0, e).sup)
    assert sups[0] < sups[1] < sups[2]
    rec = ex.domination_constant(disc, half, 2.0, 0.0,
                                 ker.build_ensemble(disc, ["kernel-sum"],
                                                    degree=50, count=6,
                                                    seed=11,
                                                    anchors=anchors))
    assert rec.witness in {row["label"] for row in rec.rows}
    degs = [d for d, _ in rec.trend]
    assert degs == sorted(degs)


def test_good_bad_split_constant_function(disc):
    cover = geo.cover_domain(disc, 0.5, 0.7, delta_min=0.05)
    gb = ex.good_bad_split(disc, cover, lambda z: np.ones_like(z), 2.0,
                           0.0, eps_depth=0.05)
    assert len(gb.bad) == 0
    assert gb.audit["ok"]


def test_good_bad_split_concentrated_kernel(disc, disc_kernel0):
    cover = geo.cover_domain(disc, 0.5, 0.7, delta_min=0.05)
    zb = 0.97
    kfun = ker.normalized_kernel(disc_kernel0, zb, 2.0)
    gb = ex.good_bad_split(disc, cover, kfun, 2.0, 0.0, eps_depth=0.05)
    assert gb.audit["ok"]
    cz = np.asarray(cover.centers)
    assert float(np.min(np.abs(cz[gb.good] - zb))) < 0.2


def test_good_bad_split_random_polys_audit(disc):
    cover = geo.cover_domain(disc, 0.5, 0.7, delta_min=0.05)
    rng = np.random.default_rng(5)
    for _ in range(8):
        coef = rng.normal(size=6) + 1j * rng.normal(size=6)
        g = ex.good_bad_split(disc, cover,
                              lambda z, c=coef: np.polyval(c, np.asarray(z)),
                              2.0, 0.0, eps_depth=0.05)
        assert g.audit["ok"]


def test_good_bad_split_miscalibrated_raises(disc, disc_kernel0):
    cover = geo.cover_domain(disc, 0.5, 0.7, delta_min=0.05)
    kfun = ker.normalized_kernel(disc_kernel0, 0.97, 2.0)
    with pytest.raises(InvariantFailure):
        ex.good_bad_split(disc, cover, kfun, 2.0, 0.0, C_eps=1e-12, M=1)


def test_carleson_norm_lebesgue(disc):
    cr = ex.carleson_norm(disc, lambda z: np.ones(np.asarray(z).shape),
                          s=0.25, eps=0.5)
    assert cr.norm == pytest.approx(1.0, abs=1e-9)
    assert np.all(cr.norm >= cr.ratios - 1e-15)


def test_carleson_point_mass_not_dense(disc):
    pm = ex.DiscreteMeasure(disc, np.array([0.3 + 0.2j]), np.array([0.05]))
    cr = ex.carleson_norm(disc, pm, s=0.25, eps=0.5)
    assert math.isfinite(cr.norm) and cr.norm > 0
    rep = dens.relative_density(disc, cr.G, 0.3, n_samples=800,
                                target_stderr=0.1, seed=3)
    assert rep.infimum < 0.05


def test_sampling_measure_single_atom(disc):
    mu, union = ex.sampling_measure(disc, np.array([0.2 + 0.1j]), R=0.7)
    ball = geo.kobayashi_ball(disc, 0.2 + 0.1j, 0.7)
    assert len(mu) == 1
    assert mu.masses[0] == pytest.approx(ball.volume_with_error()[0],
                                         abs=1e-12)
    inside = union.indicator(np.array([0.2 + 0.1j, -0.95 + 0.0j]))
    assert list(inside) == [True, False]


def test_sampling_measure_validation(disc):
    with pytest.raises(SchemaError):
        ex.sampling_measure(disc, np.array([]), R=0.7)
    with pytest.raises(SchemaError):
        ex.sampling_measure(disc, np.array([1.5 + 0j]), R=0.7)
    with pytest.raises(SchemaError):
        ex.sampling_measure(disc, np.array([0.2 + 0j]), R=0.7, r=0.5)
    r_sched = math.tanh(math.atanh(0.7) / 5)
    mu, _ = ex.sampling_measure(disc, np.array([0.2 + 0j]), R=0.7,
                                r=r_sched)
    assert mu.provenance["r"] == pytest.approx(r_sched)


def test_sampling_union_dense_lattice(disc, lattice02):
    mu, union = ex.sampling_measure(disc, lattice02, R=0.7)
    assert np.all(mu.masses > 0)
    assert len(mu) < len(lattice02)
    rep = dens.relative_density(disc, union, 0.3, n_samples=1000,
                                center_grid=dens.collar_grid(disc, j_max=6),
                                target_stderr=0.05, seed=4)
    assert rep.infimum >= 0.5


def test_sampling_union_single_ray_not_dense(disc):
    ray = np.linspace(0.05, 0.95, 40).astype(complex)
    _, union = ex.sampling_measure(disc, ray, R=0.7)
    rep = dens.relative_density(disc, union, 0.3, n_samples=800,
                                target_stderr=0.1, seed=5)
    assert rep.infimum < 0.5


def test_sampling_carleson_norm_stable_under_refinement(disc):
    norms = []
    for sp in (0.4, 0.3, 0.2):
        lat = geo.hyperbolic_lattice(disc, sp, delta_min=0.01)
        mu, _ = ex.sampling_measure(disc, lat, R=0.7)
        norms.append(ex.carleson_norm(disc, mu, with_G=False).norm)
    assert max(norms) < 10 * min(norms)


def test_point_sampling_thinning_monotone(disc, lattice02):
    e50 = ker.build_ensemble(disc, ["poly"], degree=50, count=8, seed=21)
    ps = ex.point_sampling_check(disc, lattice02, 2.0, 0.0, e50)
    assert math.isfinite(ps["constant"]) and ps["constant"] > 0
    assert ps["thinning_monotone"]
    steps = [t["step"] for t in ps["thinning"]]
    assert steps == [1, 2, 4]
    assert ps["thinning"][0]["constant"] == ps["constant"]


def test_reverse_carleson_lebesgue(disc, ens20):
    rc = ex.reverse_carleson_check(
        disc, lambda z: np.ones(np.asarray(z).shape), 2.0, 0.0, eps=0.5,
        gamma=0.6, s=0.2, ensemble=ens20,
        dens_grid=dens.collar_grid(disc, j_max=4, rays=6))
    assert rc["hypotheses_pass"]
    assert rc["hypotheses"]["precondition_s"]
    assert rc["constant"] == pytest.approx(1.0, abs=1e-9)
    assert rc["audits"]["lipschitz_ratio"] > 0


def test_reverse_carleson_inner_support_fails(disc, ens20):
    mu = ex.DiscreteMeasure(
        disc, np.array([0.1 + 0.1j, 0.3j, -0.2 + 0.1j]), np.full(3, 0.1))
    rc = ex.reverse_carleson_check(disc, mu, 2.0, 0.0, eps=0.5,
                                   gamma=0.6, s=0.2, ensemble=ens20,
                                   dens_grid=dens.collar_grid(disc,
                                                              j_max=6,
                                                              rays=8))
    assert not rc["hypotheses_pass"]
    assert not rc["hypotheses"]["exceedance_dense"]


def test_zero_set_count_monomials():
    for k in (1, 3, 6):
        zc = ex.zero_set_count(lambda z, k=k: np.asarray(z) ** k,
                               {"center": 0.0, "side": 0.5})
        assert zc["count"] == k
        assert zc["residual"] < 0.02


def test_zero_set_count_constructed_roots():
    roots = [0.05 + 0.05j, -0.1 + 0.02j, 0.08 - 0.1j, 0.9, 1.5j]

    def f(z):
        return np.prod([np.asarray(z) - a for a in roots], axis=0)

    zc = ex.zero_set_count(f, {"center": 0.0, "side": 0.5})
    assert zc["count"] == 3


def test_zero_set_count_perturbs_contour_zero():
    zc = ex.zero_set_count(lambda z: np.asarray(z) - 0.25,
                           {"center": 0.0, "side": 0.5})
    assert zc["perturbed"]
    assert zc["count"] == 1


def test_sublevel_measure_monomials():
    m0 = ex.sublevel_measure(lambda z: np.ones_like(np.asarray(z)),
                             0.0, 0.5, 1.0)
    assert m0["area"] == 0.0
    worst = 0.0
    for k in (5, 10, 20):
        for a in (0.5, 1.0, 2.0):
            m = ex.sublevel_measure(lambda z, k=k: np.asarray(z) ** k,
                                    0.0, 0.5, a, grid=(192, 256))
            exact = math.pi * 0.25 * math.exp(-2 * a / k)
            worst = max(worst, abs(m["area"] - exact) / exact)
    assert worst < 0.02


def test_sublevel_decay_rate_scales_inverse_degree():
    rates = []
    for k in (5, 10, 20, 30):
        d = ex.sublevel_decay(lambda z, k=k: np.asarray(z) ** k, 0.0, 0.5,
                              [0.5, 1.0, 1.5, 2.0, 2.5], grid=(192, 256))
        assert d["r2"] >= 0.98
        rates.append((1.0 / k, d["rate"]))
    xs = np.array([x for x, _ in rates])
    ys = np.array([y for _, y in rates])
    coef = np.polyfit(xs, ys, 1)
    pred = np.polyval(coef, xs)
    r2 = 1 - np.sum((ys - pred) ** 2) / np.sum((ys - np.mean(ys)) ** 2)
    assert r2 >= 0.98


def test_whitney_cubes_side_rule(disc):
    cubes = ex.whitney_cubes(disc, 0.25)
    assert len(cubes) > 0
    assert all(c["side"] <= 0.25 * c["dist"] + 1e-12 for c in cubes)


def test_lowdim_pairing_validation(disc, ens20):
    rad = dens.radial_curves(disc, [0.0])
    with pytest.raises(SchemaError):
        ex.lowdim_density_check(disc, rad, 2.0, 0.5, 0.1, 2.0, 0.0, ens20)
    pts = dens.point_region(disc, [0.1, 0.2])
    with pytest.raises(SchemaError):
        ex.lowdim_density_check(disc, pts, 1.0, 0.5, 0.1, 2.0, 0.0, ens20)
    full = dens.full_region(disc)
    with pytest.raises(SchemaError):
        ex.lowdim_density_check(disc, full, 1.0, 0.5, 0.1, 2.0, 0.0, ens20)
    with pytest.raises(SchemaError):
        ex.lowdim_density_check(disc, rad, 3.0, 0.5, 0.1, 2.0, 0.0, ens20)


def test_lowdim_radial_curves_kobayashi(disc):
    # 64 radial lines pass at r = 0.99 over probes matched to the grid
    # depth; a single radius fails
    grid8 = dens.collar_grid(disc, j_max=8)
    rad = dens.radial_curves(
        disc, np.linspace(0, 2 * math.pi, 64, endpoint=False))
    ens = ker.build_ensemble(disc, ["poly"], degree=20, count=6, seed=33)
    low = ex.lowdim_density_check(disc, rad, 1.0, 0.99, 0.5, 2.0, 0.0,
                                  ens, center_grid=grid8)
    assert low["density_ok"]
    assert math.isfinite(low["sup"]) and low["sup"] > 0
    single = dens.radial_curves(disc, [0.0])
    low1 = ex.lowdim_density_check(disc, single, 1.0, 0.99, 0.5, 2.0, 0.0,
                                   ens, center_grid=grid8)
    assert not low1["density_ok"]


def test_lowdim_whitney_variant(disc):
    ens = ker.build_ensemble(disc, ["poly"], degree=10, count=4, seed=33)
    rad = dens.radial_curves(
        disc, np.linspace(0, 2 * math.pi, 64, endpoint=False))
    low_rays = ex.lowdim_density_check(disc, rad, 1.0, 0.25, 0.2, 2.0, 0.0,
                                       ens, variant="whitney",
                                       whitney_depth=6)
    # deep Whitney squares fall inside the angular gaps between rays
    assert low_rays["density"]["infimum"] == 0.0
    assert not low_rays["density_ok"]
    full = dens.full_region(disc)
    low_full = ex.lowdim_density_check(disc, full, 2.0, 0.25, 0.5, 2.0,
                                       0.0, ens, variant="whitney",
                                       whitney_depth=6)
    assert low_full["density_ok"]
    assert low_full["density"]["infimum"] == pytest.approx(1.0, abs=1e-12)
    assert low_full["sup"] == pytest.approx(1.0, abs=1e-9)


def test_lowdim_predicate_matches_domination(disc):
    ann = dens.annulus_region(disc, r0=0.5)
    e = ker.build_ensemble(disc, ["poly", "kernel-sum"], degree=25,
                           count=8, seed=55)
    low = ex.lowdim_density_check(disc, ann, 2.0, 0.3, 0.1, 2.0, 0.0, e)
    base = ex.domination_constant(disc, ann, 2.0, 0.0, e)
    assert abs(low["sup"] - base.sup) / base.sup < 0.05


def test_curve_pnorm_circle_exact(disc):
    circ = dens.circle_curves(disc, [0.5])
    val = ex.curve_pnorm(disc, circ, lambda z: np.asarray(z) ** 2, 2.0, 0.0)
    # int |z^2|^2 over the circle of radius 1/2: 2 pi r * r^4
    assert val == pytest.approx(2 * math.pi * 0.5 * 0.5 ** 4, rel=1e-9)
    with pytest.raises(SchemaError):
        ex.curve_pnorm(disc, dens.full_region(disc),
                       lambda z: np.asarray(z), 2.0, 0.0)
