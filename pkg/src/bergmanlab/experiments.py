"""End-to-end studies: domination constants, good/bad ball decompositions,
Carleson-type scans with reverse estimates, point sampling, zero counts,
sublevel decay, and lower-dimensional density pipelines.

Empirical constants here are calibration artifacts: a finite ensemble can
certify growth trends and witnesses, never a universal bound.  Reports keep
per-row data so the trends are auditable downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import roots_legendre

from . import density as dens
from . import geometry as geo
from . import kernels as ker
from .util import (BudgetError, InvariantFailure, SchemaError, derive_seed,
                   det_map, make_rng)

__all__ = [
    "DiscreteMeasure", "CarlesonReport", "DominationRecord", "GoodBadSplit",
    "calibration_header", "good_bad_split", "domination_constant",
    "carleson_norm", "sampling_measure", "point_sampling_check",
    "reverse_carleson_check", "zero_set_count", "sublevel_measure",
    "sublevel_decay", "whitney_cubes", "lowdim_density_check",
    "curve_pnorm",
]


# ---------------------------------------------------------------------------
# measures and reports
# ---------------------------------------------------------------------------

@dataclass
class DiscreteMeasure:
    """Atomic measure with the weight already folded into the masses."""

    domain: geo.Domain
    atoms: np.ndarray
    masses: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms)
        self.masses = np.asarray(self.masses, dtype=float)
        if self.masses.shape[0] != self.atoms.shape[0]:
            raise SchemaError("atom/mass length mismatch")
        if not np.all(np.isfinite(self.masses)) or np.any(self.masses < 0):
            raise SchemaError("masses must be finite and nonnegative")

    def __len__(self):
        return len(self.masses)

    def total(self) -> float:
        return float(np.sum(self.masses))

    def ball_mass(self, center, r: float) -> float:
        d = geo.exact_distance(self.domain, self.atoms, center)
        return float(np.sum(self.masses[np.asarray(d) < math.atanh(r)]))

    def pnorm_sum(self, f: Callable, p: float) -> float:
        vals = np.abs(np.asarray(f(self.atoms)))
        return float(np.sum(self.masses * vals ** p))

    def thinned(self, step: int) -> "DiscreteMeasure":
        prov = dict(self.provenance)
        prov["thinning_step"] = step
        return DiscreteMeasure(self.domain, self.atoms[::step],
                               self.masses[::step], prov)


@dataclass
class CarlesonReport:
    norm: float
    centers: np.ndarray
    ratios: np.ndarray
    r_scan: float
    eps: float
    s: float
    G: Optional[dens.RegionSet]
    meta: dict = field(default_factory=dict)

    def rows(self):
        out = []
        for c, v in zip(self.centers, self.ratios):
            out.append({"center": complex(c), "ratio": float(v)})
        return out


@dataclass
class DominationRecord:
    ensemble_id: str
    rows: list
    sup: float
    witness: Optional[str]
    trend: list          # (degree, max ratio) pairs, degree-sorted
    meta: dict = field(default_factory=dict)


@dataclass
class GoodBadSplit:
    good: np.ndarray
    bad: np.ndarray
    per_ball: list
    audit: dict


def _degree_trend(rows) -> list:
    by_deg = {}
    for row in rows:
        d = row["degree"]
        v = row["ratio"]
        if math.isfinite(v):
            by_deg[d] = max(by_deg.get(d, 0.0), v)
    return sorted(by_deg.items())


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

_CAL_CACHE: dict = {}


def _domain_key(domain: geo.Domain):
    aw = getattr(domain, "axis_weights", None)
    return (domain.kind,
            tuple(np.atleast_1d(aw).tolist()) if aw is not None else None)


def _ambient_quad(domain: geo.Domain, alpha: float,
                  quad: geo.Quadrature = None):
    if quad is None:
        if domain.dim == 1:
            quad = geo.graded_polar_quadrature(levels=12, n_panel=12,
                                               n_angular=256)
        else:
            quad = geo.make_quadrature(domain, scheme="duffy", resolution=9,
                                       alpha_hint=alpha, n_radial=40,
                                       n_angular=40)
    w = quad.weights * np.abs(domain.rho_at(quad.points)) ** alpha
    return quad, w


def calibration_header(domain: geo.Domain, p: float, alpha: float,
                       eps_depth: float = 0.01, seed: int = 2024) -> dict:
    """Per-domain fitted constants for the split/reverse machinery.

    C_eps is the fitted ratio of ambient to eps-trimmed p-norms on a small
    calibration ensemble; M comes from a fixed r = 1/2, R = 0.7 cover audit;
    (K, q) for the scale precondition are calibration defaults, labeled.
    """
    key = (_domain_key(domain), float(p), float(alpha), float(eps_depth))
    if key in _CAL_CACHE:
        return dict(_CAL_CACHE[key])
    quad, w = _ambient_quad(domain, alpha)
    deep = np.asarray(domain.delta(quad.points), dtype=float) >= eps_depth
    ens = ker.build_ensemble(domain, ["poly", "kernel-sum"], degree=30,
                             count=10, seed=derive_seed(seed, "calib"),
                             alpha=alpha)
    c_eps = 1.0
    for member in ens:
        vals = np.abs(np.asarray(member(quad.points))) ** p
        num = float(np.sum(w * vals))
        den = float(np.sum(w[deep] * vals[deep]))
        if den > 0:
            c_eps = max(c_eps, num / den)
    cover = geo.cover_domain(domain, 0.5, 0.7,
                             delta_min=max(eps_depth, 0.01))
    out = {"C_eps": c_eps, "M": cover.overlap, "K": 2.0, "q": 1.0,
           "eps_depth": eps_depth, "cover_r": 0.5, "cover_R": 0.7,
           "fit": "calibration-scan; K,q defaults"}
    _CAL_CACHE[key] = dict(out)
    return out


# ---------------------------------------------------------------------------
# good/bad decomposition
# ---------------------------------------------------------------------------

def _ball_pnorm(domain: geo.Domain, ball: geo.KobayashiBall, f: Callable,
                p: float, alpha: float, seed: int = 11) -> float:
    """p-th power of the weighted norm over one ball."""
    if domain.dim == 1:
        q = ball.local_quadrature(n_r=16, n_t=48)
        w = q.weights * np.abs(domain.rho_at(q.points)) ** alpha
        return float(np.sum(w * np.abs(np.asarray(f(q.points))) ** p))
    pts = ball.sample(512, seed)
    vol = ball.volume_with_error()[0]
    vals = np.abs(np.asarray(f(pts))) ** p \
        * np.abs(domain.rho_at(pts)) ** alpha
    return float(np.mean(vals)) * vol


def good_bad_split(domain: geo.Domain, cover: geo.Cover, f: Callable,
                   p: float, alpha: float, C_eps: float = None,
                   M: int = None, eps_depth: float = 0.01,
                   quad: geo.Quadrature = None,
                   threads: int = None) -> GoodBadSplit:
    """Index k is good iff (2 C_eps M)^{1/p} ||f||_{Y_k} >= ||f||_{X_k},
    where X_k is the inflated ball.  Audits that bad balls carry at most
    half the trimmed-domain mass.
    """
    header = None
    if C_eps is None or M is None:
        header = calibration_header(domain, p, alpha, eps_depth)
    if C_eps is None:
        C_eps = header["C_eps"]
    if M is None:
        M = header["M"]
    factor = (2 * C_eps * M) ** (1.0 / p)

    def one(k):
        c = cover.centers[k]
        inner = geo.kobayashi_ball(domain, c, cover.r)
        outer = geo.kobayashi_ball(domain, c, cover.R)
        a = _ball_pnorm(domain, inner, f, p, alpha,
                        seed=derive_seed(13, "gb", k, "in"))
        b = _ball_pnorm(domain, outer, f, p, alpha,
                        seed=derive_seed(13, "gb", k, "out"))
        return a, b

    results = det_map(one, range(len(cover.centers)), threads=threads)
    per_ball = []
    good, bad = [], []
    bad_mass = 0.0
    for k, (a, b) in enumerate(results):
        is_good = factor * a ** (1.0 / p) >= b ** (1.0 / p)
        per_ball.append({"k": k, "inner_p": a, "outer_p": b,
                         "good": bool(is_good)})
        (good if is_good else bad).append(k)
        if not is_good:
            bad_mass += a
    if not good:
        raise InvariantFailure("empty good set: C_eps or M miscalibrated",
                               witness={"C_eps": C_eps, "M": M})
    quad, w = _ambient_quad(domain, alpha, quad)
    deep = np.asarray(domain.delta(quad.points), dtype=float) >= eps_depth
    vals = np.abs(np.asarray(f(quad.points))) ** p
    trimmed = float(np.sum(w[deep] * vals[deep]))
    audit = {"bad_mass": bad_mass, "trimmed_norm_p": trimmed,
             "ok": bool(bad_mass <= 0.5 * trimmed + 1e-12),
             "C_eps": C_eps, "M": M, "factor": factor}
    return GoodBadSplit(good=np.asarray(good), bad=np.asarray(bad),
                        per_ball=per_ball, audit=audit)


# ---------------------------------------------------------------------------
# domination
# ---------------------------------------------------------------------------

def domination_constant(domain: geo.Domain, E: Optional[dens.RegionSet],
                        p: float, alpha: float, ensemble,
                        measure: DiscreteMeasure = None,
                        quad: geo.Quadrature = None,
                        threads: int = None) -> DominationRecord:
    """Empirical sup over the ensemble of ||f||_{ambient} / ||f||_{E}.

    With a measure argument the denominator is the atomic p-sum; otherwise
    E must be a predicate region and the denominator restricts the ambient
    rule to E.  Growth of the degree trend is the failure witness; a finite
    ensemble can never certify domination.
    """
    quad, w = _ambient_quad(domain, alpha, quad)
    if measure is None:
        if E is None:
            raise SchemaError("need a region or a measure")
        mask = E.indicator(quad.points)
    rows = []
    sup = 0.0
    witness = None

    def one(member):
        vals = np.abs(np.asarray(member(quad.points))) ** p
        num = float(np.sum(w * vals))
        if measure is not None:
            den = measure.pnorm_sum(member, p)
        else:
            den = float(np.sum(w[mask] * vals[mask]))
        return num, den

    results = det_map(one, list(ensemble), threads=threads)
    for member, (num, den) in zip(ensemble, results):
        if den <= 0:
            ratio = math.inf
        else:
            ratio = (num / den) ** (1.0 / p)
        rows.append({"label": member.label, "kind": member.kind,
                     "degree": member.degree, "ratio": ratio})
        if ratio > sup:
            sup, witness = ratio, member.label
    return DominationRecord(
        ensemble_id=f"{len(rows)} members", rows=rows, sup=sup,
        witness=witness, trend=_degree_trend(rows),
        meta={"p": p, "alpha": alpha,
              "denominator": "measure" if measure is not None else E.label})


# ---------------------------------------------------------------------------
# Carleson scans
# ---------------------------------------------------------------------------

def _ball_weighted_volume(domain: geo.Domain, center, r: float,
                          alpha: float) -> float:
    ball = geo.kobayashi_ball(domain, center, r)
    if alpha == 0:
        return ball.volume_with_error()[0]
    if domain.dim == 1:
        q = ball.local_quadrature(n_r=24, n_t=48)
        return float(np.sum(
            q.weights * np.abs(domain.rho_at(q.points)) ** alpha))
    pts = ball.sample(1024, derive_seed(5, "wvol", repr(center)))
    vol = ball.volume_with_error()[0]
    return float(np.mean(np.abs(domain.rho_at(pts)) ** alpha)) * vol


def _avg_density(domain: geo.Domain, mu, z, r: float, alpha: float) -> float:
    """mu(Y(z,r)) / weighted |Y(z,r)|."""
    vol = _ball_weighted_volume(domain, z, r, alpha)
    if isinstance(mu, DiscreteMeasure):
        mass = mu.ball_mass(z, r)
    else:
        ball = geo.kobayashi_ball(domain, z, r)
        if domain.dim != 1:
            raise SchemaError("density scans are n = 1 only")
        q = ball.local_quadrature(n_r=24, n_t=48)
        w = q.weights * np.abs(domain.rho_at(q.points)) ** alpha
        mass = float(np.sum(w * np.asarray(mu(q.points), dtype=float)))
    return mass / vol


def carleson_norm(domain: geo.Domain, mu, scan: np.ndarray = None,
                  alpha: float = 0.0, r_scan: float = 0.5, s: float = 0.25,
                  eps: float = 0.1, with_G: bool = True,
                  max_scan: int = 20000, threads: int = None) -> CarlesonReport:
    """sup over scan centers of mu(Y(z, 1/2)) / |Y(z, 1/2)|_alpha.

    mu is a DiscreteMeasure (weight folded into masses) or a density
    relative to the weighted area.  G is the predicate region where the
    s-averaged density exceeds eps times the norm.
    """
    if isinstance(mu, DiscreteMeasure) and len(mu) == 0:
        raise SchemaError("empty measure")
    if scan is None:
        scan = geo.hyperbolic_lattice(domain, 0.35, delta_min=0.005)
    scan = np.asarray(scan)
    if len(scan) > max_scan:
        raise BudgetError(f"scan budget: {len(scan)} centers > {max_scan}")

    vals = det_map(lambda z: _avg_density(domain, mu, z, r_scan, alpha),
                   list(scan), threads=threads)
    ratios = np.asarray(vals, dtype=float)
    norm = float(np.max(ratios))
    G = None
    if with_G:
        if isinstance(mu, DiscreteMeasure) and domain.dim == 1 \
                and alpha == 0:
            atoms = np.asarray(mu.atoms, dtype=complex)
            masses = mu.masses
            tau = math.atanh(s)

            def contains(pts):
                pts = np.asarray(pts, dtype=complex)
                flat = pts.ravel()
                d = np.abs((flat[None, :] - atoms[:, None])
                           / (1 - np.conj(atoms)[:, None] * flat[None, :]))
                mass = np.sum(np.where(d < math.tanh(tau),
                                       masses[:, None], 0.0), axis=0)
                re = (1 - np.abs(flat) ** 2) * s / (1 - (s * np.abs(flat)) ** 2)
                vol = math.pi * re ** 2
                return (mass / vol > eps * norm).reshape(pts.shape)
        else:
            def contains(pts):
                pts = np.asarray(pts, dtype=complex)
                flat = pts.ravel()
                out = np.array([
                    _avg_density(domain, mu, z, s, alpha) > eps * norm
                    for z in flat])
                return out.reshape(pts.shape)
        G = dens.RegionSet(domain=domain, kind="predicate",
                           label=f"carleson-exceed-{eps}",
                           contains=contains, nu=2.0)
    return CarlesonReport(norm=norm, centers=scan, ratios=ratios,
                          r_scan=r_scan, eps=eps, s=s, G=G,
                          meta={"alpha": alpha})


# ---------------------------------------------------------------------------
# sampling constructions
# ---------------------------------------------------------------------------

def sampling_measure(domain: geo.Domain, points: np.ndarray, R: float = 0.7,
                     alpha: float = 0.0, r: float = None) -> tuple:
    """Vitali-thinned atomic measure with masses |Y(b_k, R)| |rho(b_k)|^a.

    The inner radius follows the schedule r = tanh(atanh(R)/5); returns
    (measure, union region of the inflated balls).
    """
    points = np.asarray(points)
    if points.size == 0:
        raise SchemaError("empty selection")
    r_sched = math.tanh(math.atanh(R) / 5)
    if r is not None and abs(r - r_sched) > 1e-9:
        raise SchemaError("inner radius off schedule r = tanh(atanh(R)/5)")
    if np.any(np.asarray(domain.rho_at(points)).real >= 0):
        raise SchemaError("sampling points must lie inside the domain")
    kept = geo.vitali_select(domain, points, r_sched, R)
    if len(kept) == 0:
        raise SchemaError("empty selection")
    atoms = points[kept]
    masses = []
    for b in atoms:
        vol = geo.kobayashi_ball(domain, b, R).volume_with_error()[0]
        masses.append(vol * abs(domain.rho_at(np.asarray([b]))[0]) ** alpha)
    mu = DiscreteMeasure(domain, atoms, np.asarray(masses),
                         provenance={"r": r_sched, "R": R, "alpha": alpha,
                                     "n_input": int(points.shape[0]),
                                     "kept": kept.tolist()})
    tau = math.atanh(R)

    def contains(pts):
        pts = np.asarray(pts, dtype=complex if domain.dim == 1 else None)
        if domain.dim == 1:
            flat = np.asarray(pts, dtype=complex).ravel()
            d = np.abs((flat[None, :] - np.asarray(atoms)[:, None])
                       / (1 - np.conj(np.asarray(atoms))[:, None]
                          * flat[None, :]))
            hit = np.any(np.arctanh(np.clip(d, 0, 1 - 1e-15)) < tau, axis=0)
            return hit.reshape(np.asarray(pts).shape)
        flat = pts.reshape(-1, pts.shape[-1])
        hit = np.zeros(len(flat), dtype=bool)
        for b in atoms:
            hit |= np.asarray(geo.exact_distance(domain, flat, b)) < tau
        return hit.reshape(pts.shape[:-1])

    union = dens.RegionSet(domain=domain, kind="predicate",
                           label="sampling-union", contains=contains, nu=2.0)
    return mu, union


def point_sampling_check(domain: geo.Domain, points: np.ndarray, p: float,
                         alpha: float, ensemble,
                         quad: geo.Quadrature = None,
                         thinning: Sequence[int] = (1, 2, 4),
                         threads: int = None) -> dict:
    """Empirical C in ||f||^p <= C sum_j |f(a_j)|^p delta(a_j)^{n+1+alpha},
    with a thinning trend (dropping atoms can only raise the constant)."""
    points = np.asarray(points)
    quad, w = _ambient_quad(domain, alpha, quad)
    n = domain.dim
    expo = n + 1 + alpha
    tables = []
    rows = []
    sup = 0.0
    witness = None
    for step in thinning:
        pts = points[::step]
        dl = np.asarray(domain.delta(pts), dtype=float) ** expo

        def one(member):
            vals = np.abs(np.asarray(member(quad.points))) ** p
            num = float(np.sum(w * vals))
            den = float(np.sum(np.abs(np.asarray(member(pts))) ** p * dl))
            if den == 0:
                raise ArithmeticError("zero sampling sum")
            return num / den

        cs = det_map(one, list(ensemble), threads=threads)
        cmax = max(cs)
        tables.append({"step": step, "n_points": len(pts),
                       "constant": cmax})
        if step == thinning[0]:
            for member, c in zip(ensemble, cs):
                rows.append({"label": member.label, "kind": member.kind,
                             "degree": member.degree, "ratio": c})
                if c > sup:
                    sup, witness = c, member.label
    monotone = all(a["constant"] <= b["constant"] * (1 + 1e-9)
                   for a, b in zip(tables, tables[1:]))
    return {"constant": sup, "witness": witness, "rows": rows,
            "trend": _degree_trend(rows), "thinning": tables,
            "thinning_monotone": monotone,
            "meta": {"p": p, "alpha": alpha, "exponent": expo}}


# ---------------------------------------------------------------------------
# reverse Carleson
# ---------------------------------------------------------------------------

def _ball_sup(domain: geo.Domain, f: Callable, z, r: float) -> float:
    ball = geo.kobayashi_ball(domain, z, r)
    if domain.dim == 1:
        q = ball.local_quadrature(n_r=24, n_t=64)
        pts = q.points
    else:
        pts = ball.sample(1024, derive_seed(3, "bsup", repr(z)))
    return float(np.max(np.abs(np.asarray(f(pts)))))


def reverse_carleson_check(domain: geo.Domain, mu, p: float, alpha: float,
                           eps: float, gamma: float, s: float, ensemble,
                           r_dens: float = 0.3, scan: np.ndarray = None,
                           quad: geo.Quadrature = None, seed: int = 808,
                           n_pairs: int = 24, dens_grid: np.ndarray = None,
                           threads: int = None) -> dict:
    """Hypotheses (finite Carleson norm; exceedance region relatively
    dense), then the empirical reverse constant over the ensemble, plus the
    sampled Lipschitz-ratio and averaged-difference audits at scale s.

    For measures supported above a depth floor, pass a dens_grid whose
    probes stay above that floor; deeper probes would report a vacuous
    density failure."""
    header = calibration_header(domain, p, alpha)
    s_max = eps ** (1.0 / p) * gamma ** header["q"] / header["K"]
    pre_ok = bool(s <= s_max + 1e-12)
    cr = carleson_norm(domain, mu, scan=scan, alpha=alpha, s=s, eps=eps,
                       threads=threads)
    norm_ok = bool(math.isfinite(cr.norm) and cr.norm > 0)
    dens_report = dens.relative_density(
        domain, cr.G, r_dens, center_grid=dens_grid, n_samples=1500,
        target_stderr=0.05, seed=derive_seed(seed, "rc-dens"),
        threads=threads)
    dens_ok = bool(dens_report.infimum >= gamma)
    hypotheses = {"precondition_s": pre_ok, "s_max": s_max,
                  "carleson_finite": norm_ok, "carleson_norm": cr.norm,
                  "exceedance_dense": dens_ok,
                  "density_infimum": dens_report.infimum}

    quad, w = _ambient_quad(domain, alpha, quad)
    rows = []
    sup = 0.0
    witness = None
    for member in ensemble:
        vals = np.abs(np.asarray(member(quad.points))) ** p
        num = float(np.sum(w * vals))
        if isinstance(mu, DiscreteMeasure):
            den = mu.pnorm_sum(member, p)
        else:
            den = float(np.sum(
                w * np.asarray(mu(quad.points), dtype=float) * vals))
        ratio = math.inf if den <= 0 else num / den
        rows.append({"label": member.label, "kind": member.kind,
                     "degree": member.degree, "ratio": ratio})
        if math.isfinite(ratio) and ratio > sup:
            sup, witness = ratio, member.label

    # Lipschitz ratio audit on sampled pairs
    rng = make_rng(seed, "rc-lip")
    zs = geo.hyperbolic_lattice(domain, 0.5, delta_min=0.05)
    zs = zs[rng.choice(len(zs), size=min(n_pairs, len(zs)), replace=False)]
    members = list(ensemble)[:4]
    lip = 0.0
    avg_diff = 0.0
    for z in zs:
        ball = geo.kobayashi_ball(domain, z, s)
        wpt = ball.sample(1, derive_seed(seed, "rc-pair", repr(z)))[0]
        dzw = float(np.asarray(geo.exact_distance(domain, z, wpt)))
        volw = _ball_weighted_volume(domain, z, s, alpha)
        if domain.dim == 1:
            q = ball.local_quadrature(n_r=16, n_t=48)
            wq = q.weights * np.abs(domain.rho_at(q.points)) ** alpha
        for f in members:
            ref = _ball_sup(domain, f, z, 0.5)
            if ref <= 0:
                continue
            fz = complex(np.asarray(f(np.asarray([z])))[0])
            fw = complex(np.asarray(f(np.asarray([wpt])))[0])
            if dzw > 0:
                lip = max(lip, abs(fz - fw) / (dzw * ref))
            if domain.dim == 1:
                avg = float(np.sum(
                    wq * np.abs(np.asarray(f(q.points))) ** p)) / volw
                avg_diff = max(avg_diff,
                               abs(abs(fz) ** p - avg) / max(ref ** p, 1e-300))
    audits = {"lipschitz_ratio": lip, "lipschitz_scale": s,
              "averaged_difference": avg_diff,
              "averaged_fitted_C": avg_diff / s if s > 0 else math.inf}
    return {"hypotheses": hypotheses,
            "hypotheses_pass": pre_ok and norm_ok and dens_ok,
            "constant": sup, "witness": witness, "rows": rows,
            "trend": _degree_trend(rows), "audits": audits,
            "calibration": header}


# ---------------------------------------------------------------------------
# zeros and sublevel sets
# ---------------------------------------------------------------------------

def _square_contour(center: complex, side: float, n_side: int) -> np.ndarray:
    hlf = side / 2
    t = np.arange(n_side) / n_side
    edges = []
    corners = [center + hlf * (1 + 1j), center + hlf * (-1 + 1j),
               center + hlf * (-1 - 1j), center + hlf * (1 - 1j)]
    for a, b in zip(corners, corners[1:] + corners[:1]):
        edges.append(a + (b - a) * t)
    return np.concatenate(edges)


def zero_set_count(f: Callable, Q: dict, max_refine: int = 14,
                   n0: int = 64) -> dict:
    """Argument-principle count of zeros in the square Q.

    The contour phase is accumulated with adaptive midpoint insertion until
    every step turns by less than pi/2; a near-zero on the contour perturbs
    the square (recorded).
    """
    center = complex(Q["center"])
    side = float(Q["side"])
    perturbed = False
    for attempt in range(6):
        pts = _square_contour(center, side, n0)
        vals = np.asarray(f(pts))
        if np.min(np.abs(vals)) > 1e-9 * max(np.max(np.abs(vals)), 1e-300):
            break
        side *= 1.0 + 1e-3
        perturbed = True
    else:
        raise InvariantFailure("zeros on the contour persist under "
                               "perturbation")

    hlf = side / 2
    corners = np.array([center + hlf * (1 + 1j), center + hlf * (-1 + 1j),
                        center + hlf * (-1 - 1j), center + hlf * (1 - 1j)])

    def param(t):
        # piecewise-linear parametrization of the contour over [0, 4)
        t = np.asarray(t, dtype=float) % 4.0
        k = np.floor(t).astype(int)
        frac = t - k
        a = corners[k % 4]
        b = corners[(k + 1) % 4]
        return a + (b - a) * frac

    ts = np.linspace(0.0, 4.0, n0 * 4, endpoint=False)
    ts = np.append(ts, 4.0)
    vals = np.asarray(f(param(ts)))
    for depth in range(max_refine):
        steps = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(steps) >= math.pi / 2
        if not np.any(bad):
            break
        mids = (ts[:-1][bad] + ts[1:][bad]) / 2
        ts = np.sort(np.concatenate([ts, mids]))
        vals = np.asarray(f(param(ts)))
        if len(ts) > 200000:
            raise InvariantFailure("contour refinement budget exhausted")
    else:
        raise InvariantFailure("contour residual too large")
    winding = float(np.sum(np.angle(vals[1:] / vals[:-1]))) / (2 * math.pi)
    count = int(round(winding))
    residual = abs(winding - count)
    if residual >= 0.1:
        raise InvariantFailure(f"contour residual {residual:.3f} >= 0.1")
    return {"count": count, "winding": winding, "residual": residual,
            "perturbed": perturbed, "side": side, "n_nodes": len(ts)}


def sublevel_measure(f: Callable, z, r: float, a: float,
                     domain: geo.Domain = None, grid: tuple = (96, 256)) -> dict:
    """Area of {|f| <= e^{-a} sup_{Y(z,r)} |f|} inside Y(z, r) (n = 1)."""
    if domain is None:
        domain = geo.unit_disc()
    ball = geo.kobayashi_ball(domain, z, r)
    q = ball.local_quadrature(n_r=grid[0], n_t=grid[1])
    vals = np.abs(np.asarray(f(q.points)))
    sup = float(np.max(vals))
    if sup <= 0:
        raise SchemaError("normalization failure: sup |f| = 0 on the ball")
    area = float(np.sum(q.weights[vals / sup <= math.exp(-a)]))
    return {"area": area, "sup": sup, "ball_area": float(np.sum(q.weights))}


def sublevel_decay(f: Callable, z, r: float, a_values: Sequence[float],
                   domain: geo.Domain = None,
                   grid: tuple = (96, 256)) -> dict:
    """Decay table of sublevel areas and the fitted exponential rate."""
    rows = []
    for a in a_values:
        m = sublevel_measure(f, z, r, a, domain=domain, grid=grid)
        rows.append({"a": a, "area": m["area"]})
    xs = np.array([row["a"] for row in rows])
    ys = np.array([row["area"] for row in rows])
    live = ys > 0
    if np.sum(live) >= 2:
        coef = np.polyfit(xs[live], np.log(ys[live]), 1)
        rate = -float(coef[0])
        pred = np.polyval(coef, xs[live])
        res = np.log(ys[live]) - pred
        tot = np.log(ys[live]) - np.mean(np.log(ys[live]))
        r2 = 1 - float(np.sum(res ** 2)) / float(np.sum(tot ** 2)) \
            if np.sum(tot ** 2) > 0 else 1.0
    else:
        rate, r2 = math.inf, 1.0
    return {"rows": rows, "rate": rate, "r2": r2}


# ---------------------------------------------------------------------------
# lower-dimensional sets
# ---------------------------------------------------------------------------

def whitney_cubes(domain: geo.Domain, r: float, max_depth: int = 9,
                  root_half: float = 1.0) -> list:
    """Dyadic squares with side <= r * dist(square, complement), maximal in
    their dyadic family.  Distance probed on a 3x3 grid per square."""
    if domain.dim != 1:
        raise SchemaError("Whitney subdivision is n = 1 only")
    out = []
    probes = np.array([a + 1j * b
                       for a in (-1, 0, 1) for b in (-1, 0, 1)],
                      dtype=complex)

    def visit(center: complex, half: float, depth: int):
        pts = center + probes * half
        deltas = np.asarray(domain.delta(pts), dtype=float)
        inside = np.asarray(domain.rho_at(pts)).real < 0
        if not np.any(inside):
            return
        if np.all(inside):
            dist = float(np.min(deltas))
            if 2 * half <= r * dist:
                out.append({"center": center, "side": 2 * half,
                            "dist": dist})
                return
        if depth >= max_depth:
            return
        for da in (-0.5, 0.5):
            for db in (-0.5, 0.5):
                visit(center + half * (da + 1j * db), half / 2, depth + 1)

    visit(0j, root_half, 0)
    return out


def _adaptive_panels(fn, dfn, t0, t1, tol: float = 0.02,
                     max_depth: int = 12) -> list:
    """Split parameter ranges until chord length tracks arc length."""
    xg, wg = roots_legendre(8)
    panels = []
    stack = [(t0, t1, 0)]
    while stack:
        a, b, depth = stack.pop()
        t = 0.5 * (b - a) * (xg + 1) + a
        arc = float(np.sum(0.5 * (b - a) * wg * np.abs(dfn(t))))
        chord = abs(complex(fn(np.asarray([b]))[0])
                    - complex(fn(np.asarray([a]))[0]))
        if depth < max_depth and arc > 0 \
                and (arc - chord) / arc > tol:
            m = 0.5 * (a + b)
            stack.append((a, m, depth + 1))
            stack.append((m, b, depth + 1))
        else:
            panels.append((a, b))
    return panels


def curve_pnorm(domain: geo.Domain, E: dens.RegionSet, f: Callable,
                p: float, alpha: float) -> float:
    """Arc integral of |f|^p |rho|^alpha over the curves of E (32-node
    panels, curvature-adaptive splits)."""
    if E.kind != "curves":
        raise SchemaError("curve integral needs a curve region")
    xg, wg = roots_legendre(32)
    total = 0.0
    for fn, dfn, t0, t1 in E.curves:
        for a, b in _adaptive_panels(fn, dfn, t0, t1):
            t = 0.5 * (b - a) * (xg + 1) + a
            w = 0.5 * (b - a) * wg
            pts = fn(t)
            total += float(np.sum(
                w * np.abs(dfn(t))
                * np.abs(np.asarray(f(pts))) ** p
                * np.abs(domain.rho_at(pts)) ** alpha))
    return total


@dataclass
class _CurveSubset:
    curves: list


def lowdim_density_check(domain: geo.Domain, E: dens.RegionSet, nu: float,
                         r: float, gamma: float, p: float, alpha: float,
                         ensemble, variant: str = "kobayashi",
                         quad: geo.Quadrature = None, seed: int = 99,
                         center_grid: np.ndarray = None,
                         whitney_depth: int = 7,
                         threads: int = None) -> dict:
    """Density condition over Kobayashi balls or Whitney squares, then the
    empirical domination constant with the nu-dimensional denominator."""
    if domain.dim != 1:
        raise SchemaError("lower-dimensional checks are n = 1 only")
    if not 0 <= nu <= 2:
        raise SchemaError("nu must lie in [0, 2]")
    if E.kind == "curves" and not 0 < nu < 2:
        raise SchemaError("curve regions pair with nu in (0, 2)")
    if E.kind == "points" and nu != 0:
        raise SchemaError("point clouds pair with nu = 0")
    if E.kind == "predicate" and nu != 2:
        raise SchemaError("predicate regions pair with nu = 2")

    if variant == "kobayashi":
        rep = dens.relative_density(domain, E, r, n_samples=2000,
                                    center_grid=center_grid,
                                    target_stderr=0.05,
                                    seed=derive_seed(seed, "lowdim"),
                                    threads=threads)
        density = {"variant": variant, "infimum": rep.infimum,
                   "argmin": rep.argmin, "report": rep}
        dens_ok = bool(rep.infimum >= gamma)
    elif variant == "whitney":
        cubes = whitney_cubes(domain, r, max_depth=whitney_depth)
        if not cubes:
            raise SchemaError("no Whitney squares at this r")
        if E.kind == "curves":
            # coarse polylines let each cube skip curves that stay clear
            samp_pts, samp_gap = [], []
            for fn, dfn, t0, t1 in E.curves:
                pts = np.asarray(fn(np.linspace(t0, t1, 129)), dtype=complex)
                samp_pts.append(pts)
                samp_gap.append(float(np.max(np.abs(np.diff(pts))))
                                if len(pts) > 1 else 0.0)
            samp_pts = np.asarray(samp_pts)
            samp_gap = np.asarray(samp_gap)
        ratios = []
        for c in cubes:
            half = c["side"] / 2
            lo = c["center"] - half * (1 + 1j)
            hi = c["center"] + half * (1 + 1j)

            def inside(pts, lo=lo, hi=hi):
                pts = np.asarray(pts, dtype=complex)
                return ((pts.real >= lo.real) & (pts.real <= hi.real)
                        & (pts.imag >= lo.imag) & (pts.imag <= hi.imag))

            if E.kind == "curves":
                cheb = np.maximum(np.abs(samp_pts.real - c["center"].real),
                                  np.abs(samp_pts.imag - c["center"].imag))
                near = np.min(cheb, axis=1) <= half + samp_gap
                if np.any(near):
                    sub = _CurveSubset([crv for crv, keep
                                        in zip(E.curves, near) if keep])
                    meas = dens._curve_measure_inside(sub, inside,
                                                      feature=c["side"] / 4)
                else:
                    meas = 0.0
            elif E.kind == "points":
                meas = float(np.sum(inside(np.asarray(E.points))))
            else:
                g = (np.arange(24) + 0.5) / 24 * c["side"] - half
                GX, GY = np.meshgrid(g, g)
                cell = (c["side"] / 24) ** 2
                sub = c["center"] + GX.ravel() + 1j * GY.ravel()
                meas = float(np.sum(E.contains(sub))) * cell
            ratios.append({"center": c["center"], "side": c["side"],
                           "ratio": meas / c["side"] ** nu})
        inf_ratio = min(row["ratio"] for row in ratios)
        density = {"variant": variant, "infimum": inf_ratio,
                   "cubes": len(ratios), "rows": ratios}
        dens_ok = bool(inf_ratio >= gamma)
    else:
        raise SchemaError(f"unknown variant {variant!r}")

    quad, w = _ambient_quad(domain, alpha, quad)
    if E.kind == "predicate":
        mask = E.indicator(quad.points)
    rows = []
    sup = 0.0
    witness = None
    for member in ensemble:
        vals = np.abs(np.asarray(member(quad.points))) ** p
        num = float(np.sum(w * vals))
        if E.kind == "curves":
            den = curve_pnorm(domain, E, member, p, alpha)
        elif E.kind == "points":
            pts = np.asarray(E.points)
            den = float(np.sum(
                np.abs(np.asarray(member(pts))) ** p
                * np.abs(domain.rho_at(pts)) ** alpha))
        else:
            den = float(np.sum(w[mask] * vals[mask]))
        ratio = math.inf if den <= 0 else (num / den) ** (1.0 / p)
        rows.append({"label": member.label, "kind": member.kind,
                     "degree": member.degree, "ratio": ratio})
        if math.isfinite(ratio) and ratio > sup:
            sup, witness = ratio, member.label
    return {"density": density, "density_ok": dens_ok, "rows": rows,
            "sup": sup, "witness": witness, "trend": _degree_trend(rows),
            "meta": {"nu": nu, "r": r, "gamma": gamma, "p": p,
                     "alpha": alpha}}
