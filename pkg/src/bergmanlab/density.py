"""Candidate dominating sets: relative density, Berezin transforms, tails.

A RegionSet is one of three representations: a membership predicate (area
measure), a finite union of C^1 curves (arc length), or a point cloud
(counting measure).  Density scans measure |E cap Y(z, r)| / |Y(z, r)|
over center grids accumulating at the boundary; for lower-dimensional sets
the ratio follows the invariant-ball normalization
|Y|^{(n-1)/(n(n+1))} H^{2n-2+nu}(E cap Y) / |Y|^{(2n-2+nu)/(2n)}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import hyp2f1, roots_legendre

from . import geometry as geo
from . import kernels as ker
from .util import (BudgetError, SchemaError, derive_seed, det_map, make_rng)

__all__ = [
    "RegionSet", "DensityReport", "BerezinReport",
    "full_region", "empty_region", "annulus_region", "halfplane_region",
    "sector_region", "cell_region", "curve_region", "point_region",
    "circle_curves", "radial_curves", "complement_region", "collar_grid",
    "relative_density", "berezin_indicator", "berezin_infimum",
    "kernel_tail", "toeplitz_lower_bound",
]


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

@dataclass
class RegionSet:
    """Measurable candidate set in one of three representations.

    kind "predicate" carries a vectorized membership closure; kind
    "curves" a list of (fn, dfn, t0, t1) parametric curves; kind "points"
    a finite cloud.  nu is the transverse Hausdorff dimension parameter
    (2 for area, 1 for curves, 0 for points, at n = 1).
    """

    domain: geo.Domain
    kind: str
    label: str
    nu: float
    contains: Optional[Callable] = None
    curves: list = field(default_factory=list)
    points: Optional[np.ndarray] = None
    angular_profile: Optional[Callable] = None   # t -> [(lo, hi), ...]

    def indicator(self, pts) -> np.ndarray:
        if self.kind != "predicate":
            raise SchemaError("indicator needs a predicate region")
        return np.asarray(self.contains(pts), dtype=bool)

    def describe(self) -> dict:
        return {"kind": self.kind, "label": self.label, "nu": self.nu}


def full_region(domain: geo.Domain) -> RegionSet:
    return RegionSet(domain=domain, kind="predicate", label="full", nu=2.0,
                     contains=lambda z: np.ones(np.shape(np.asarray(z))[:1]
                                                if domain.dim == 2
                                                else np.shape(z), dtype=bool),
                     angular_profile=lambda t: [(0.0, 2 * math.pi)])


def empty_region(domain: geo.Domain) -> RegionSet:
    return RegionSet(domain=domain, kind="predicate", label="empty", nu=2.0,
                     contains=lambda z: np.zeros(np.shape(np.asarray(z))[:1]
                                                 if domain.dim == 2
                                                 else np.shape(z), dtype=bool),
                     angular_profile=lambda t: [])


def annulus_region(domain: geo.Domain, r0: float = 0.5) -> RegionSet:
    """{|z| > r0}: relatively dense (every boundary-hugging ball meets it)."""
    def inside(z):
        z = np.asarray(z)
        rad = np.abs(z) if domain.dim == 1 else np.linalg.norm(z, axis=-1)
        return rad > r0
    return RegionSet(domain=domain, kind="predicate",
                     label=f"annulus-{r0}", nu=2.0, contains=inside,
                     angular_profile=lambda t: ([(0.0, 2 * math.pi)]
                                                if t > r0 else []))


def halfplane_region(domain: geo.Domain, angle: float = 0.0) -> RegionSet:
    """{Re(z e^{-i angle}) > 0}: misses the boundary arc around
    -e^{i angle}, so it is not relatively dense."""
    def inside(z):
        z = np.asarray(z, dtype=complex)
        first = z if domain.dim == 1 else z[..., 0]
        return np.real(first * np.exp(-1j * angle)) > 0
    lo, hi = angle - math.pi / 2, angle + math.pi / 2
    return RegionSet(domain=domain, kind="predicate",
                     label=f"halfplane-{angle:.3f}", nu=2.0, contains=inside,
                     angular_profile=lambda t: [(lo, hi)] if t > 0
                     else [(0.0, 2 * math.pi)])


def sector_region(domain: geo.Domain, th0: float, th1: float) -> RegionSet:
    if not th1 > th0:
        raise SchemaError("need th1 > th0")
    def inside(z):
        z = np.asarray(z, dtype=complex)
        first = z if domain.dim == 1 else z[..., 0]
        ang = np.mod(np.angle(first) - th0, 2 * math.pi)
        return ang < (th1 - th0)
    return RegionSet(domain=domain, kind="predicate",
                     label=f"sector-{th0:.3f}-{th1:.3f}", nu=2.0,
                     contains=inside,
                     angular_profile=lambda t: [(th0, th1)] if t > 0
                     else [(0.0, 2 * math.pi)])


def cell_region(domain: geo.Domain, cells: Sequence) -> RegionSet:
    """Union of axis-aligned rectangles [x0, x1] x [y0, y1] (n = 1)."""
    cells = [tuple(map(float, c)) for c in cells]
    def inside(z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=bool)
        for x0, x1, y0, y1 in cells:
            out |= ((z.real >= x0) & (z.real <= x1)
                    & (z.imag >= y0) & (z.imag <= y1))
        return out
    return RegionSet(domain=domain, kind="predicate",
                     label=f"cells-{len(cells)}", nu=2.0, contains=inside)


def complement_region(E: RegionSet) -> RegionSet:
    if E.kind != "predicate":
        raise SchemaError("complement needs a predicate region")
    prof = None
    if E.angular_profile is not None:
        def prof(t, base=E.angular_profile):
            segs = []
            for lo, hi in base(t):
                width = min(hi - lo, 2 * math.pi)
                lo = lo % (2 * math.pi)
                if lo + width <= 2 * math.pi:
                    segs.append((lo, lo + width))
                else:
                    segs.append((lo, 2 * math.pi))
                    segs.append((0.0, lo + width - 2 * math.pi))
            segs.sort()
            out, cursor = [], 0.0
            for lo, hi in segs:
                if lo > cursor:
                    out.append((cursor, lo))
                cursor = max(cursor, hi)
            if cursor < 2 * math.pi:
                out.append((cursor, 2 * math.pi))
            return out
    return RegionSet(domain=E.domain, kind="predicate",
                     label=f"not-{E.label}", nu=E.nu,
                     contains=lambda z: ~E.contains(z),
                     angular_profile=prof)


def curve_region(domain: geo.Domain, curves: Sequence,
                 label: str = "curves") -> RegionSet:
    """curves: list of (fn, dfn, t0, t1) with fn vectorized over t."""
    return RegionSet(domain=domain, kind="curves", label=label, nu=1.0,
                     curves=list(curves))


def circle_curves(domain: geo.Domain, radii: Sequence[float]) -> RegionSet:
    curves = []
    for r in radii:
        fn = (lambda t, r=r: r * np.exp(1j * t))
        dfn = (lambda t, r=r: 1j * r * np.exp(1j * t))
        curves.append((fn, dfn, 0.0, 2 * math.pi))
    return curve_region(domain, curves, label=f"circles-{len(curves)}")


def radial_curves(domain: geo.Domain, angles: Sequence[float],
                  t1: float = 1.0) -> RegionSet:
    curves = []
    for a in angles:
        fn = (lambda t, a=a: t * np.exp(1j * a) + 0j)
        dfn = (lambda t, a=a: np.exp(1j * a) * np.ones_like(t))
        curves.append((fn, dfn, 0.0, t1))
    return curve_region(domain, curves, label=f"radii-{len(curves)}")


def point_region(domain: geo.Domain, points) -> RegionSet:
    return RegionSet(domain=domain, kind="points", label="points", nu=0.0,
                     points=np.asarray(points))


# ---------------------------------------------------------------------------
# density scans
# ---------------------------------------------------------------------------

def collar_grid(domain: geo.Domain, j_max: int = 10, rays: int = None,
                seed: int = 404) -> np.ndarray:
    """Center grid accumulating geometrically toward the boundary."""
    if rays is None:
        rays = 16 if domain.dim == 1 else 48
    deltas = [2.0 ** (-j) for j in range(1, j_max + 1)]
    return np.asarray(geo.collar_points(domain, deltas, rays=rays,
                                        seed=seed))


@dataclass
class DensityReport:
    centers: np.ndarray
    deltas: np.ndarray
    ratios: np.ndarray
    stderrs: np.ndarray
    r: float
    infimum: float
    argmin: object
    ci: tuple
    label: str

    def rows(self):
        out = []
        for c, d, q, s in zip(self.centers, self.deltas, self.ratios,
                              self.stderrs):
            center = (f"{complex(c):.12g}" if np.isscalar(c) or c.ndim == 0
                      else ";".join(f"{complex(x):.12g}" for x in c))
            out.append({"center": center, "delta": float(d),
                        "ratio": float(q), "stderr": float(s)})
        return out


def _curve_measure_inside(E: RegionSet, inside: Callable,
                          feature: float = 0.02,
                          tol_t: float = 1e-7) -> float:
    """Arc length of E's curves inside the set given by `inside`.

    Panels subdivide at membership crossings; all-outside panels are only
    accepted once their arc length drops below the feature scale (the
    target set's diameter), so short arcs cannot hide between probes.
    All-inside panels integrate directly (our curve families cross a
    convex ball boundary at most twice, so five interior probes certify
    the panel).
    """
    x16, w16 = roots_legendre(16)
    total = 0.0
    for fn, dfn, t0, t1 in E.curves:
        stack = [(t0, t1)]
        while stack:
            a, b = stack.pop()
            probes = np.linspace(a, b, 5)
            flags = inside(fn(probes))
            seg = b - a
            arc = seg * float(np.max(np.abs(dfn(probes))))
            if np.all(flags):
                t = 0.5 * (b - a) * (x16 + 1) + a
                total += 0.5 * (b - a) * float(np.sum(w16 * np.abs(dfn(t))))
            elif not np.any(flags):
                if arc > feature and seg > tol_t:
                    m = 0.5 * (a + b)
                    stack.extend([(a, m), (m, b)])
            elif seg < tol_t:
                frac = float(np.mean(flags))
                total += frac * seg * float(np.mean(np.abs(dfn(probes))))
            else:
                m = 0.5 * (a + b)
                stack.extend([(a, m), (m, b)])
    return total


def _nu_ratio(domain: geo.Domain, measure: float, vol: float,
              nu: float) -> float:
    n = domain.dim
    lead = vol ** ((n - 1) / (n * (n + 1))) if n > 1 else 1.0
    return lead * measure / vol ** ((2 * n - 2 + nu) / (2 * n))


def relative_density(domain: geo.Domain, E: RegionSet, r: float,
                     center_grid: np.ndarray = None,
                     quad: geo.Quadrature = None, n_samples: int = 4000,
                     seed: int = 1234, target_stderr: float = 0.01,
                     max_rounds: int = 4, bootstrap: int = 200,
                     threads: int = None) -> DensityReport:
    """Per-center relative density of E in Kobayashi balls Y(z, r).

    Predicate regions use membership-aware Monte Carlo inside the exact
    ball shape (no grid masking); stderr above target triggers sample
    doubling, and exhausting max_rounds raises BudgetError.  Curve and
    point regions use the invariant-ball normalized ratio.
    """
    if not 0 < r < 1:
        raise SchemaError("r must lie in (0,1)")
    if center_grid is None:
        center_grid = collar_grid(domain, seed=derive_seed(seed, "grid"))
    centers = np.asarray(center_grid)
    deltas = domain.delta(centers)

    def one(i):
        z = centers[i]
        ball = geo.kobayashi_ball(domain, z, r)
        if E.kind == "predicate":
            n = n_samples
            for round_ in range(max_rounds + 1):
                pts = ball.sample(n, derive_seed(seed, "density", i, round_))
                hits = E.indicator(pts)
                ratio = float(np.mean(hits))
                stderr = math.sqrt(max(ratio * (1 - ratio), 1e-12) / n)
                if stderr <= target_stderr:
                    return ratio, stderr, int(np.sum(hits)), n
                n *= 2
            raise BudgetError(
                f"density stderr {stderr:.3g} above {target_stderr} after "
                f"{max_rounds} refinements at center index {i}")
        vol, _ = ball.volume_with_error()
        if E.kind == "curves":
            feature = (ball.euclid_radius / 2 if ball.euclid_radius
                       else vol ** 0.5 / 4)
            meas = _curve_measure_inside(
                E, lambda pts: ball.membership(pts) == geo.IN,
                feature=feature)
        else:
            flags = ball.membership(E.points) == geo.IN
            meas = float(np.sum(flags))
        ratio = _nu_ratio(domain, meas, vol, E.nu)
        return ratio, 0.0, 0, 0

    results = det_map(one, range(len(centers)), threads=threads)
    ratios = np.array([x[0] for x in results])
    stderrs = np.array([x[1] for x in results])
    k = int(np.argmin(ratios))
    ci = (float(ratios[k]), float(ratios[k]))
    if E.kind == "predicate" and len(centers):
        hits = np.array([x[2] for x in results], dtype=float)
        ns = np.array([max(x[3], 1) for x in results], dtype=float)
        rng = make_rng(seed, "bootstrap")
        infs = np.empty(bootstrap)
        for b in range(bootstrap):
            resampled = rng.binomial(ns.astype(int), hits / ns) / ns
            infs[b] = float(np.min(resampled))
        ci = (float(np.quantile(infs, 0.025)),
              float(np.quantile(infs, 0.975)))
    return DensityReport(centers=centers, deltas=deltas, ratios=ratios,
                         stderrs=stderrs, r=r, infimum=float(ratios[k]),
                         argmin=centers[k], ci=ci, label=E.label)


# ---------------------------------------------------------------------------
# Berezin transforms of indicators
# ---------------------------------------------------------------------------

def _angular_intervals_integral(a: float, s: float, intervals,
                                peak: float) -> float:
    """int over the union of angular intervals of |1 - a e^{i(t - peak)}|^{-2s}
    dt, panels graded toward the kernel peak t = peak."""
    if a >= 1:
        raise SchemaError("angular reduction needs a < 1")
    x8, w8 = roots_legendre(12)
    total = 0.0
    scale = max(1 - a, 1e-12)
    for lo, hi in intervals:
        width = hi - lo
        if width <= 0:
            continue
        # wrap the peak into [lo, lo + 2 pi) resolution of the interval
        p = peak + 2 * math.pi * math.ceil((lo - peak) / (2 * math.pi))
        cuts = {lo, hi}
        for q in (p - 2 * math.pi, p, p + 2 * math.pi):
            if lo < q < hi:
                cuts.add(q)
            for j in range(1, 14):
                step = scale * 2.0 ** j
                for e in (q - step, q + step):
                    if lo < e < hi:
                        cuts.add(e)
        edges = sorted(cuts)
        for aa, bb in zip(edges[:-1], edges[1:]):
            t = 0.5 * (bb - aa) * (x8 + 1) + aa
            vals = (1 - 2 * a * np.cos(t - peak) + a * a) ** (-s)
            total += 0.5 * (bb - aa) * float(np.sum(w8 * vals))
    return total


def _berezin_disc_profile(model: ker.KernelModel, E: RegionSet, z: complex,
                          p: float) -> float:
    """||k_z||_{L^p_alpha(E)}^p via radial panels x angular intervals."""
    alpha = model.alpha
    zc = complex(z)
    a_abs, peak = abs(zc), float(np.angle(zc)) if zc != 0 else 0.0
    s = p * (alpha + 2) / 2.0
    kappa = (alpha + 1) / math.pi
    t, w = ker._graded_radial_panels()
    total = 0.0
    for ti, wi in zip(t, w):
        ivs = E.angular_profile(ti)
        if not ivs:
            continue
        ang = _angular_intervals_integral(a_abs * ti, s, ivs, peak)
        total += wi * ti * (1 - ti * ti) ** alpha * ang
    return kappa ** p * total


def _berezin_mobius_mc(model: ker.KernelModel, E: RegionSet, z: complex,
                       p: float, n: int, seed: int) -> float:
    """Disc fallback: importance sampling in Mobius coordinates, where the
    p = 2, alpha = 0 kernel mass is exactly uniform."""
    alpha = model.alpha
    zc = complex(z)
    rng = make_rng(seed, "berezin", repr(zc), p)
    u = np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * math.pi, n)
    v = u * np.exp(1j * th)
    w = (zc - v) / (1 - np.conj(zc) * v)
    kappa = (alpha + 1) / math.pi
    expo = p * (alpha + 2) - 2 * alpha - 4
    dens = (kappa ** p * (1 - abs(zc) ** 2) ** (alpha + 2 - p * (alpha + 2))
            * (1 - u * u) ** alpha * np.abs(1 - np.conj(zc) * v) ** expo)
    hits = E.indicator(w)
    return float(np.mean(dens * hits) * math.pi)


def berezin_indicator(model: ker.KernelModel, E: RegionSet, z, p: float,
                      alpha: float = None, quad: geo.Quadrature = None,
                      n_mc: int = 200000, seed: int = 505) -> float:
    """Indicator Berezin transform ||k_z^{p,alpha}||_{L^p_alpha(E)}."""
    if alpha is not None and abs(alpha - model.alpha) > 1e-12:
        raise SchemaError("alpha mismatch with kernel model")
    if E.kind != "predicate":
        raise SchemaError("Berezin transform needs an area region")
    if p == math.inf:
        return _berezin_sup(model, E, z)
    nrm = ker.kernel_norm(model, z, p)
    if model.domain.kind == "disc" and model.form == "closed":
        if E.angular_profile is not None:
            val = _berezin_disc_profile(model, E, z, p)
        else:
            val = _berezin_mobius_mc(model, E, z, p, n_mc, seed)
        return val ** (1.0 / p) / nrm
    if quad is None:
        scheme = "duffy" if model.domain.kind in ("ball", "ellipsoid") \
            else "tensor"
        quad = geo.make_quadrature(model.domain, scheme=scheme, resolution=9,
                                   alpha_hint=model.alpha)
    vals = (np.abs(model.evaluate(z, quad.points)) ** p
            * np.abs(model.domain.rho_at(quad.points)) ** model.alpha
            * E.indicator(quad.points))
    return float(np.real(quad.integrate(vals))) ** (1.0 / p) / nrm


def _berezin_sup(model: ker.KernelModel, E: RegionSet, z) -> float:
    """p = inf variant: sup_E |K(z, .)| / sup_Omega |K(z, .)|; reported
    separately from the p < inf scan."""
    pts = []
    for dlt in (0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3):
        pts.extend(geo.collar_points(model.domain, [dlt], rays=256, seed=9))
    pts = np.asarray(pts)
    vals = np.abs(model.evaluate(z, pts))
    top = ker.kernel_norm(model, z, math.inf)
    hits = E.indicator(pts)
    if not np.any(hits):
        return 0.0
    return float(np.max(vals[hits]) / top)


@dataclass
class BerezinReport:
    centers: np.ndarray
    deltas: np.ndarray
    values: np.ndarray
    infimum: float
    argmin: object
    trend: list      # (delta bucket, min value) rows, boundary approach


def berezin_infimum(model: ker.KernelModel, E: RegionSet, p: float,
                    alpha: float = None, center_grid: np.ndarray = None,
                    threads: int = None) -> BerezinReport:
    if center_grid is None:
        center_grid = collar_grid(model.domain)
    centers = np.asarray(center_grid)
    deltas = model.domain.delta(centers)
    vals = np.array(det_map(
        lambda i: berezin_indicator(model, E, centers[i], p, alpha),
        range(len(centers)), threads=threads))
    k = int(np.argmin(vals))
    trend = []
    for b in sorted(set(np.round(np.log2(np.maximum(deltas, 1e-12))))):
        sel = np.round(np.log2(np.maximum(deltas, 1e-12))) == b
        trend.append((float(2.0 ** b), float(np.min(vals[sel]))))
    return BerezinReport(centers=centers, deltas=deltas, values=vals,
                         infimum=float(vals[k]), argmin=centers[k],
                         trend=trend)


# ---------------------------------------------------------------------------
# kernel tails
# ---------------------------------------------------------------------------

def _tail_closed(model: ker.KernelModel, z, r: float, p: float) -> float:
    """Exact automorphism reduction of the tail integral: Y(z, r) pulls
    back to {|v| < r}, and every factor is closed-form."""
    a = model.alpha
    if model.domain.kind == "disc":
        t = abs(complex(z))
        kappa = (a + 1) / math.pi
        m = (p * (a + 2) - 2 * a - 4) / 2.0
        val = (kappa ** p * (1 - t * t) ** (a + 2 - p * (a + 2))
               * ker.radial_norm_integral(t, -m, a, lo=r, hi=1.0))
        return val ** (1.0 / p)
    t = float(np.linalg.norm(np.asarray(z, dtype=complex)))
    kappa = (a + 1) * (a + 2) / math.pi ** 2
    m = (p * (3 + a) - 2 * a - 6) / 2.0
    # second-variable integral leaves min(1-u^2, 1-r^2)^{alpha+1}
    x16, w16 = roots_legendre(16)
    edges = [0.0, r]
    for j in range(1, 15):
        e = 1 - (1 - r) * 2.0 ** (-j)
        edges.append(e)
    edges.append(1.0)
    total = 0.0
    for aa, bb in zip(edges[:-1], edges[1:]):
        u = 0.5 * (bb - aa) * (x16 + 1) + aa
        wgt = 0.5 * (bb - aa) * w16
        inner = np.minimum(1 - u * u, 1 - r * r) ** (a + 1)
        vals = hyp2f1(-m, -m, 1.0, (t * u) ** 2)
        total += float(np.sum(wgt * u * inner * vals))
    val = (kappa ** p * (1 - t * t) ** (a + 3 - p * (3 + a))
           * math.pi / (a + 1) * 2 * math.pi * total)
    return val ** (1.0 / p)


def kernel_tail(model: ker.KernelModel, z, r: float, p: float,
                alpha: float = None, quad: geo.Quadrature = None) -> float:
    """||k_z^{p,alpha}||_{L^p_alpha(Omega minus Y(z, r))}.

    Closed-form domains use the exact automorphism reduction; series
    kernels fall back to quadrature with the ball excluded by membership.
    """
    if alpha is not None and abs(alpha - model.alpha) > 1e-12:
        raise SchemaError("alpha mismatch with kernel model")
    if not 0 < r < 1:
        raise SchemaError("r must lie in (0,1)")
    nrm = ker.kernel_norm(model, z, p)
    if model.form == "closed":
        return _tail_closed(model, z, r, p) / nrm
    if quad is None:
        scheme = "duffy" if model.domain.kind in ("ball", "ellipsoid") \
            else "tensor"
        quad = geo.make_quadrature(model.domain, scheme=scheme,
                                   resolution=9, alpha_hint=model.alpha)
    ball = geo.kobayashi_ball(model.domain, z, r)
    outside = ball.membership(quad.points) != geo.IN
    vals = (np.abs(model.evaluate(z, quad.points)) ** p
            * np.abs(model.domain.rho_at(quad.points)) ** model.alpha
            * outside)
    return float(np.real(quad.integrate(vals))) ** (1.0 / p) / nrm


# ---------------------------------------------------------------------------
# Toeplitz lower bounds
# ---------------------------------------------------------------------------

@dataclass
class EmpiricalBound:
    infimum: float
    witness: str
    ratios: dict


def toeplitz_lower_bound(model: ker.KernelModel, sigma, ensemble,
                         quad: geo.Quadrature = None) -> EmpiricalBound:
    """Empirical inf over the ensemble of <T_sigma f, f> / ||f||_2^2."""
    if isinstance(sigma, RegionSet):
        region = sigma
        sig = lambda z: region.indicator(z).astype(float)
    else:
        sig = sigma
    if quad is None:
        scheme = {"disc": "polar-graded", "ball": "duffy",
                  "ellipsoid": "duffy", "custom": "tensor"}[model.domain.kind]
        quad = geo.make_quadrature(model.domain, scheme=scheme, resolution=9,
                                   alpha_hint=model.alpha)
    ratios = {}
    for member in ensemble:
        num = ker.toeplitz_quadratic_form(model, sig, member, quad)
        den = ker.toeplitz_quadratic_form(model, lambda z: 1.0
                                          + 0.0 * np.real(z if model.domain.dim == 1 else z[..., 0]),
                                          member, quad)
        ratios[member.label] = num / den if den > 0 else math.inf
    witness = min(ratios, key=ratios.get)
    return EmpiricalBound(infimum=float(ratios[witness]), witness=witness,
                          ratios=ratios)
