"""Propagation-of-smallness machinery: Green solves, two-potential weight,
the weighted dbar inequality, doubling indices, three-sphere comparisons."""

import math
import os
import tempfile

import numpy as np
import pytest

import bergmanlab.carleman as car
import bergmanlab.geometry as geo
import bergmanlab.kernels as ker
from bergmanlab.util import InvariantFailure, SchemaError


# frozen at the shared 256-node geometry (disc X of radius 1/2, Y of
# radius 1/8, d = 1/10, E the upper angular half of Y)
FROZEN = {
    "gamma": 0.5,
    "c1": 0.007212569188466192,
    "rho": 0.2581358288015035,
    "S": 0.012674113249690089,
    "delta": 0.003606284594233096,
    "nu": 0.018135657310913985,
    "theta": 0.16586764006481694,
    "s_collar": 0.09381651171329058,
    "sstar": 1.6931471805599454,
}


def test_green_disc_oracle():
    # -Lap(phi) = unit bump at the center of the unit disc: away from the
    # source, phi(r) = -log(r)/(2 pi)
    reg = car.exact_region({"kind": "disc", "radius": 1.0}, n_grid=512,
                           pad=0.05)
    src = car.mollified_bump(reg, (0.0, 0.0), 0.02)
    sol = car.green_solve(reg, src)
    XX, YY = reg.grid
    rr = np.sqrt(XX ** 2 + YY ** 2)
    band = reg.Z_mask & (rr > 0.1) & (rr < 0.9)
    exact = -np.log(rr[band]) / (2 * math.pi)
    err = float(np.max(np.abs(sol.phi[band] - exact) / exact))
    assert err < 0.02
    assert sol.residual < 1e-8
    assert sol.min_value() >= -1e-12


def test_green_solve_flags(canonical_region):
    region = canonical_region
    zero = np.zeros_like(region.Z_mask, dtype=float)
    sol = car.green_solve(region, zero)
    assert any("sourceless" in f for f in sol.flags)
    assert float(np.max(np.abs(sol.phi))) == 0.0
    signed = car.mollified_bump(region, (0.0, 0.0), 0.05) \
        - car.mollified_bump(region, (0.1, 0.0), 0.04)
    sol2 = car.green_solve(region, signed)
    assert "signed-source" in sol2.flags
    with pytest.raises(SchemaError):
        car.green_solve(region, zero[:10, :10])
    bump = car.mollified_bump(region, (0.3, 0.0), 0.05)
    with pytest.raises(SchemaError):
        car.green_solve(region, bump, require_support_in_Y=True)


def test_green_source_monotonicity(canonical_region):
    region = canonical_region
    rng = np.random.default_rng(7)
    for _ in range(3):
        c = rng.uniform(-0.1, 0.1, 2)
        base = car.mollified_bump(region, c, 0.03)
        extra = car.mollified_bump(region, -c, 0.025)
        pa = car.green_solve(region, base + extra).phi
        pb = car.green_solve(region, base).phi
        assert float(np.min(pa - pb)) >= -1e-12


def test_green_regularity_probe(canonical_region):
    gp = car.green_regularity_probe(canonical_region, eta=0.05)
    assert gp["inf_interior"] > 0
    assert gp["decreasing"]
    assert len(gp["trend"]) >= 3
    with pytest.raises(SchemaError):
        car.green_regularity_probe(canonical_region,
                                   eta=canonical_region.h)


def test_export_green_roundtrip():
    reg = car.exact_region({"kind": "disc", "radius": 0.5}, n_grid=128)
    sol = car.green_solve(reg, car.mollified_bump(reg, (0.0, 0.0), 0.05))
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "green")
        bin_path, hdr_path = car.export_green(sol, path)
        assert os.path.exists(bin_path) and os.path.exists(hdr_path)
        arr, hdr = car.load_green_grid(path)
    assert np.array_equal(arr, sol.phi)
    assert hdr["format"] == "grid-float64-le"
    assert float(hdr["spacing"]) == reg.h


def test_build_z_audit(canonical_region):
    aud = canonical_region.audit()
    assert aud["separation_ok"]
    assert aud["diam_Y"] == pytest.approx(0.25, rel=1e-3)
    with pytest.raises(SchemaError):
        car.build_Z({"kind": "disc", "radius": 0.5}, d=0.3)


def test_exterior_sphere_audit(canonical_region):
    es = car.exterior_sphere_audit(canonical_region)
    assert es["checked"] > 0
    assert es["violations"] == 0


def test_build_z_square_and_ellipse():
    for shape in ({"kind": "square", "half": 0.4},
                  {"kind": "ellipse", "a": 0.5, "b": 0.3}):
        region = car.build_Z(shape, d=0.1, n_grid=192)
        aud = region.audit()
        assert aud["separation_ok"]


def test_weight_constants_frozen(canonical_weight):
    w = canonical_weight
    got = w.describe()
    assert got["gamma"] == FROZEN["gamma"]
    for key, want in FROZEN.items():
        assert got[key] == pytest.approx(want, rel=1e-6), key


def test_weight_identities(canonical_weight):
    w = canonical_weight
    assert w.rho == w.c1 / (2 * w.C2)
    assert w.delta == w.c1 / 2
    assert w.nu == 2 * (w.S - w.delta)
    assert abs(w.nu * w.theta - w.delta + w.delta * w.theta) < 1e-15
    assert w.sstar == 1 + math.log(1 / w.gamma)
    region = w.region
    assert float(np.min(w.phi[region.Y_mask])) >= w.delta - 1e-12
    col = region.collar(w.s_collar)
    assert float(np.max(w.phi[col])) <= w.c1 / 4 + 1e-12


def test_weight_cutoff_support(canonical_weight):
    w = canonical_weight
    region = w.region
    psi = w.cutoff()
    near = region.Z_mask & (region.dist_to_boundary() <= 4 * region.h)
    assert float(np.max(psi[near])) == 0.0
    deep = region.interior(w.s_collar)
    assert float(np.min(psi[deep])) > 1 - 1e-12
    assert float(np.max(psi)) <= 1.0


def test_weight_rejects_empty_E(canonical_region):
    with pytest.raises(SchemaError):
        car.carleman_weight(canonical_region,
                            np.zeros_like(canonical_region.Y_mask))


def test_carleman_inequality_slack(canonical_weight):
    w = canonical_weight
    region = w.region
    psi = w.cutoff()
    pts = region.points
    # the concentration point sits in Y minus E (lower half), where the
    # weight's Laplacian is +rho, so the rhs comes out positive
    members = [
        (pts - 0.03 + 0.02j) ** 3 + 0.5,
        np.conj(pts) ** 2 + 0.3,
        np.exp(-np.abs(pts + 0.08j) ** 2 / 0.02 ** 2),
    ]
    for h in (0.05, 0.1, 0.2):
        for f in members:
            res = car.carleman_check(w, h, psi * f)
            assert res["slack"] >= -res["tol_disc"]
    conc = car.carleman_check(w, 0.1, psi * members[2])
    assert conc["rhs"] > 0


def test_carleman_check_rejections(canonical_weight):
    w = canonical_weight
    region = w.region
    with pytest.raises(SchemaError):
        car.carleman_check(w, 0.1, np.zeros((4, 4), dtype=complex))
    with pytest.raises(SchemaError):
        car.carleman_check(w, 0.1,
                           np.zeros_like(region.Z_mask, dtype=complex))
    with pytest.raises(SchemaError):
        # no boundary clearance
        car.carleman_check(w, 0.1,
                           np.ones_like(region.Z_mask, dtype=complex))


def test_carleman_tol_halves_on_refinement(canonical_weight):
    w256 = canonical_weight
    region512 = car.build_Z({"kind": "disc", "radius": 0.5}, d=0.1,
                            y_shape={"kind": "disc", "radius": 0.125},
                            n_grid=512)
    pts = region512.points
    ang = np.mod(np.angle(pts), 2 * np.pi)
    w512 = car.carleman_weight(region512,
                               region512.Y_mask & (ang <= np.pi))
    f256 = (w256.region.points - 0.03 + 0.02j) ** 3 + 0.5
    f512 = (pts - 0.03 + 0.02j) ** 3 + 0.5
    a = car.carleman_check(w256, 0.1, w256.cutoff() * f256)
    b = car.carleman_check(w512, 0.1, w512.cutoff() * f512)
    na = a["tol_disc"] / max(abs(a["lhs"]), abs(a["rhs"]))
    nb = b["tol_disc"] / max(abs(b["lhs"]), abs(b["rhs"]))
    assert nb / na == pytest.approx(0.5, abs=1e-12)
    assert b["ok"]


def test_optimize_h_root_and_branches(canonical_weight):
    w = canonical_weight
    h0, bound = car.optimize_h(A=1.0, B=1e-6, Cconst=2.0, nu=w.nu,
                               delta=w.delta)
    G = math.exp((w.nu + w.delta) / h0) / (2.0 * h0)
    assert G == pytest.approx(1e6, rel=1e-6)
    assert h0 < 1
    theta = w.delta / (w.nu + w.delta)
    want = 2 * 2.0 ** (1 - theta) * (1e-6) ** theta
    assert bound == pytest.approx(want, rel=1e-6)
    h0b, boundb = car.optimize_h(A=1.0, B=0.99, Cconst=0.1, nu=w.nu,
                                 delta=w.delta)
    assert h0b >= 1
    wantb = 0.1 ** (-theta) * math.exp(w.delta) * 0.99 ** theta
    assert boundb == pytest.approx(wantb, rel=1e-6)
    _, binf = car.optimize_h(A=1.0, B=0.0, Cconst=2.0, nu=w.nu,
                             delta=w.delta)
    assert math.isinf(binf)
    with pytest.raises(SchemaError):
        car.optimize_h(A=1.0, B=2.0, Cconst=2.0, nu=w.nu, delta=w.delta)


def test_doubling_index_monomials():
    for k in (1, 3, 7):
        di = car.doubling_index(lambda zz, k=k: zz ** k, 0.0, 0.5, 0.9,
                                math.inf)
        assert di.N == pytest.approx(k * math.log(0.9 / 0.5), abs=1e-9)
    di2 = car.doubling_index(lambda zz: zz ** 3, 0.0, 0.5, 0.9, 2.0)
    assert di2.N == pytest.approx(4 * math.log(0.9 / 0.5), abs=1e-6)
    d1 = car.doubling_index(lambda zz: np.ones_like(zz), 0.1 + 0.1j,
                            0.3, 0.8, math.inf)
    assert abs(d1.N) < 1e-12
    with pytest.raises(ArithmeticError):
        car.doubling_index(lambda zz: np.zeros_like(zz), 0.0, 0.3, 0.8, 2.0)
    with pytest.raises(SchemaError):
        car.doubling_index(lambda zz: zz, 0.0, 0.9, 0.5, 2.0)


def test_three_sphere_no_violations(canonical_region, canonical_weight):
    pts = canonical_region.points
    ang = np.mod(np.angle(pts), 2 * np.pi)
    E = canonical_region.Y_mask & (ang <= np.pi)
    ens = ker.build_ensemble(geo.unit_disc(),
                             ["poly", "kernel-sum", "blaschke"],
                             degree=24, count=12, seed=99)
    ts = car.three_sphere_estimate(canonical_region, E, ens)
    assert ts["violations"] == 0
    assert ts["fitted_C"] > 0
    live = [r for r in ts["records"] if not r["skipped"]]
    assert len(live) == 12
    for r in live:
        assert r["ratio"] <= ts["fitted_C"] \
            * math.exp(ts["fitted_C"] * r["x"]) * (1 + 1e-9)
        assert r["x"] == pytest.approx((r["N"] + 1) * ts["sstar"], rel=1e-12)


def test_sstar_regression_growth(canonical_region):
    sr = car.sstar_regression(canonical_region, [1.0, 0.5, 0.25, 0.0625])
    assert sr["slope"] > 0
    assert sr["fitted_C"] == max(r["fitted_C"] for r in sr["rows"])
    gammas = [r["gamma"] for r in sr["rows"]]
    assert all(a > b for a, b in zip(gammas, gammas[1:]))
    svals = [r["S"] for r in sr["rows"]]
    assert all(a <= b + 1e-12 for a, b in zip(svals, svals[1:]))


def test_carleman_check_product(canonical_weight):
    pr = car.carleman_check_product(
        canonical_weight, 0.1,
        lambda a, b: (a + 0.1) * (b - 0.05) + 0.2, stride=8)
    assert pr["ok"]
    assert pr["slack"] >= -pr["tol_disc"]
