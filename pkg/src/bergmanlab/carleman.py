"""Plane-domain Carleman machinery: Green functions on irregular regions,
the two-potential Carleman weight, the weighted inequality check, the
h-optimization, and the resulting three-sphere estimate with doubling index.

Regions live on a uniform Cartesian grid with the 5-point Laplacian and a
direct sparse factorization.  The continuum statements are audited at grid
tolerance; every exponential weight is computed relative to its maximum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree, ConvexHull

from . import geometry as geo
from .util import InvariantFailure, SchemaError, derive_seed, make_rng

__all__ = [
    "PlaneRegion", "GreenSolution", "CarlemanWeight", "DoublingIndex",
    "shape_mask", "shape_boundary", "shape_diam", "build_Z", "green_solve",
    "green_regularity_probe", "carleman_weight", "carleman_check",
    "optimize_h", "three_sphere_estimate", "doubling_index",
    "carleman_check_product", "sstar_regression", "mollified_bump",
]


# ---------------------------------------------------------------------------
# shapes and regions
# ---------------------------------------------------------------------------

def shape_mask(shape: dict, XX: np.ndarray, YY: np.ndarray) -> np.ndarray:
    kind = shape["kind"]
    cx, cy = shape.get("center", (0.0, 0.0))
    if kind == "disc":
        return (XX - cx) ** 2 + (YY - cy) ** 2 < shape["radius"] ** 2
    if kind == "square":
        hlf = shape["half"]
        return (np.abs(XX - cx) < hlf) & (np.abs(YY - cy) < hlf)
    if kind == "ellipse":
        return ((XX - cx) / shape["a"]) ** 2 \
            + ((YY - cy) / shape["b"]) ** 2 < 1
    raise SchemaError(f"unknown shape kind {kind!r}")


def shape_boundary(shape: dict, spacing: float) -> np.ndarray:
    """Boundary polyline sampled at most `spacing` apart, as (m, 2)."""
    kind = shape["kind"]
    cx, cy = shape.get("center", (0.0, 0.0))
    if kind == "disc":
        r = shape["radius"]
        m = max(16, int(math.ceil(2 * math.pi * r / spacing)))
        t = np.linspace(0, 2 * math.pi, m, endpoint=False)
        return np.stack([cx + r * np.cos(t), cy + r * np.sin(t)], axis=1)
    if kind == "square":
        hlf = shape["half"]
        m = max(4, int(math.ceil(2 * hlf / spacing)))
        side = np.linspace(-hlf, hlf, m, endpoint=False)
        pts = []
        for trun in side:
            pts.append((cx + trun, cy - hlf))
        for trun in side:
            pts.append((cx + hlf, cy + trun))
        for trun in side:
            pts.append((cx - trun, cy + hlf))
        for trun in side:
            pts.append((cx - hlf, cy - trun))
        return np.asarray(pts)
    if kind == "ellipse":
        a, b = shape["a"], shape["b"]
        m = max(32, int(math.ceil(2 * math.pi * max(a, b) / spacing)) * 2)
        t = np.linspace(0, 2 * math.pi, m, endpoint=False)
        return np.stack([cx + a * np.cos(t), cy + b * np.sin(t)], axis=1)
    raise SchemaError(f"unknown shape kind {kind!r}")


def shape_diam(shape: dict) -> float:
    kind = shape["kind"]
    if kind == "disc":
        return 2 * shape["radius"]
    if kind == "square":
        return 2 * shape["half"] * math.sqrt(2)
    if kind == "ellipse":
        return 2 * max(shape["a"], shape["b"])
    raise SchemaError(f"unknown shape kind {kind!r}")


def _scaled(shape: dict, k: float) -> dict:
    out = dict(shape)
    cx, cy = shape.get("center", (0.0, 0.0))
    out["center"] = (cx * k, cy * k)
    for key in ("radius", "half", "a", "b"):
        if key in out:
            out[key] = out[key] * k
    return out


@dataclass
class PlaneRegion:
    """Grid mask triple Y subset Z subset X with boundary-ball trimming."""

    xs: np.ndarray
    ys: np.ndarray
    h: float
    X_mask: np.ndarray
    Y_mask: np.ndarray
    Z_mask: np.ndarray
    boundary: np.ndarray         # sampled boundary polyline of X
    ball_centers: np.ndarray     # trimming ball centers (on the polyline)
    d: float
    x_shape: dict
    y_shape: dict
    affine_scale: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self):
        return np.meshgrid(self.xs, self.ys, indexing="xy")

    @property
    def points(self) -> np.ndarray:
        XX, YY = self.grid
        return XX + 1j * YY

    def area(self, mask: np.ndarray) -> float:
        return float(np.sum(mask)) * self.h ** 2

    def dist_to_boundary(self) -> np.ndarray:
        """Distance transform to the complement of Z, in physical units."""
        if "edt" not in self._cache:
            self._cache["edt"] = ndimage.distance_transform_edt(
                self.Z_mask, sampling=self.h)
        return self._cache["edt"]

    def collar(self, s: float) -> np.ndarray:
        """Z_s: the s-collar of the boundary inside Z."""
        return self.Z_mask & (self.dist_to_boundary() <= s)

    def interior(self, s: float) -> np.ndarray:
        """Z'_s: points deeper than s."""
        return self.Z_mask & (self.dist_to_boundary() > s)

    def mask_diam(self, mask: np.ndarray) -> float:
        idx = np.argwhere(mask)
        if len(idx) < 3:
            return 0.0
        pts = np.stack([self.xs[idx[:, 1]], self.ys[idx[:, 0]]], axis=1)
        hull = pts[ConvexHull(pts).vertices]
        d2 = np.max(np.sum((hull[:, None, :] - hull[None, :, :]) ** 2,
                           axis=-1))
        return float(math.sqrt(d2))

    def audit(self) -> dict:
        """Containment, separation and diameter invariants."""
        if np.any(self.Y_mask & ~self.Z_mask):
            raise InvariantFailure("Y not contained in Z",
                                   witness={"escaped": int(np.sum(
                                       self.Y_mask & ~self.Z_mask))})
        if np.any(self.Z_mask & ~self.X_mask):
            raise InvariantFailure("Z not contained in X")
        dy = shape_diam(self.y_shape) * self.affine_scale
        if abs(dy - 0.25) > 1e-3 * 0.25:
            raise InvariantFailure(f"diam(Y) = {dy} != 1/4")
        tree = cKDTree(self.boundary)
        yb = shape_boundary(_scaled(self.y_shape, self.affine_scale),
                            self.d / 8)
        sep = float(np.min(tree.query(yb)[0]))
        grid_diam = self.mask_diam(self.Y_mask)
        return {"diam_Y": dy, "diam_Y_grid": grid_diam, "separation": sep,
                "separation_ok": bool(sep >= self.d - 1e-12)}


def build_Z(x_shape: dict, d: float, y_shape: dict = None,
            n_grid: int = 512, normalize: bool = True) -> PlaneRegion:
    """Trim X by boundary balls of radius d/2 centered along its boundary.

    The boundary polyline is sampled at spacing d/8 (finer than the d/4
    precondition).  Shapes are rescaled so diam(Y) = 1/4 when a Y shape is
    given and normalize is True.
    """
    if not d < 0.25:
        raise SchemaError("d must be < 1/4 (larger separations are the "
                          "simple case and out of scope)")
    if y_shape is None:
        y_shape = {"kind": "disc", "radius": 0.125}
    k = 0.25 / shape_diam(y_shape) if normalize else 1.0
    xs_shape = _scaled(x_shape, k)
    ys_shape = _scaled(y_shape, k)
    spacing = d / 8
    boundary = shape_boundary(xs_shape, spacing)
    gaps = np.linalg.norm(np.roll(boundary, -1, axis=0) - boundary, axis=1)
    if np.max(gaps) > d / 4:
        raise SchemaError("boundary polyline resolved coarser than d/4")
    # bounding box with a margin
    lo = boundary.min() - 2 * d
    hi = boundary.max() + 2 * d
    span = max(hi, -lo)
    xs = np.linspace(-span, span, n_grid)
    h = xs[1] - xs[0]
    XX, YY = np.meshgrid(xs, xs, indexing="xy")
    X_mask = shape_mask(xs_shape, XX, YY)
    Y_mask = shape_mask(ys_shape, XX, YY)
    tree = cKDTree(boundary)
    dist = tree.query(np.stack([XX.ravel(), YY.ravel()], axis=1),
                      workers=-1)[0].reshape(XX.shape)
    Z_mask = X_mask & (dist > d / 2)
    region = PlaneRegion(xs=xs, ys=xs, h=h, X_mask=X_mask, Y_mask=Y_mask,
                         Z_mask=Z_mask, boundary=boundary,
                         ball_centers=boundary, d=d, x_shape=x_shape,
                         y_shape=y_shape, affine_scale=k)
    region.audit()
    return region


def exact_region(shape: dict, n_grid: int = 512,
                 pad: float = 0.1) -> PlaneRegion:
    """Region with Z = X = shape (no trimming), for solver oracles."""
    if "radius" in shape:
        ref = shape["radius"] * 2
    else:
        ref = shape_diam(shape)
    boundary = shape_boundary(shape, ref / 256)
    span = boundary.max() + pad
    xs = np.linspace(-span, span, n_grid)
    h = xs[1] - xs[0]
    XX, YY = np.meshgrid(xs, xs, indexing="xy")
    M = shape_mask(shape, XX, YY)
    return PlaneRegion(xs=xs, ys=xs, h=h, X_mask=M, Y_mask=M.copy(),
                       Z_mask=M.copy(), boundary=boundary,
                       ball_centers=boundary[:0], d=0.0, x_shape=shape,
                       y_shape=shape, affine_scale=1.0)


def exterior_sphere_audit(region: PlaneRegion, n_samples: int = 200,
                          seed: int = 31) -> dict:
    """Check the d/4 exterior-sphere property on sampled boundary-of-Z
    points: the witness ball sits inside the trimming ball that removed
    the point, so no Z node may intrude."""
    if region.d <= 0:
        return {"checked": 0, "violations": 0}
    edt = region.dist_to_boundary()
    rim = region.Z_mask & (edt <= 1.5 * region.h)
    idx = np.argwhere(rim)
    rng = make_rng(seed, "exterior-sphere")
    take = idx[rng.choice(len(idx), size=min(n_samples, len(idx)),
                          replace=False)]
    pts = np.stack([region.xs[take[:, 1]], region.ys[take[:, 0]]], axis=1)
    tree = cKDTree(region.ball_centers)
    dists, nearest = tree.query(pts)
    znodes = np.argwhere(region.Z_mask)
    zpts = np.stack([region.xs[znodes[:, 1]], region.ys[znodes[:, 0]]],
                    axis=1)
    ztree = cKDTree(zpts)
    r4 = region.d / 4
    checked = violations = 0
    for p, di, ni in zip(pts, dists, nearest):
        if di > region.d / 2 + 2 * region.h:
            continue     # rim portion not generated by a trimming ball
        c = region.ball_centers[ni]
        u = (c - p) / max(np.linalg.norm(c - p), 1e-15)
        center = p + u * r4
        checked += 1
        if ztree.query_ball_point(center, r4 - 2.5 * region.h,
                                  return_length=True) > 0:
            violations += 1
    return {"checked": checked, "violations": violations}


# ---------------------------------------------------------------------------
# Green solves
# ---------------------------------------------------------------------------

@dataclass
class GreenSolution:
    region: PlaneRegion
    phi: np.ndarray              # full grid, zero outside Z
    source: np.ndarray
    residual: float
    flags: list
    bc: str = "dirichlet-zero"

    def min_value(self) -> float:
        return float(np.min(self.phi[self.region.Z_mask]))


def export_green(sol: GreenSolution, path: str) -> tuple:
    """Write the grid as raw float64 (row-major) next to a text header."""
    bin_path = path + ".bin"
    hdr_path = path + ".hdr"
    arr = np.ascontiguousarray(sol.phi, dtype="<f8")
    with open(bin_path, "wb") as fh:
        fh.write(arr.tobytes())
    reg = sol.region
    lines = [
        "format: grid-float64-le",
        f"rows: {arr.shape[0]}",
        f"cols: {arr.shape[1]}",
        f"spacing: {float(reg.h)!r}",
        f"x0: {float(reg.xs[0])!r}",
        f"y0: {float(reg.ys[0])!r}",
        f"bc: {sol.bc}",
        f"residual: {float(sol.residual)!r}",
    ]
    with open(hdr_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return bin_path, hdr_path


def load_green_grid(path: str) -> tuple:
    """Read back an exported grid: (array, header dict)."""
    hdr = {}
    with open(path + ".hdr") as fh:
        for line in fh:
            key, _, val = line.strip().partition(": ")
            hdr[key] = val
    arr = np.frombuffer(open(path + ".bin", "rb").read(), dtype="<f8")
    arr = arr.reshape(int(hdr["rows"]), int(hdr["cols"]))
    return arr, hdr


class _Solver:
    """5-point Dirichlet Laplacian on the Z nodes, factored once."""

    def __init__(self, region: PlaneRegion):
        self.region = region
        mask = region.Z_mask
        self.index = -np.ones(mask.shape, dtype=np.int64)
        self.nodes = np.argwhere(mask)
        self.index[mask] = np.arange(len(self.nodes))
        n = len(self.nodes)
        h2 = region.h ** 2
        rows, cols, vals = [], [], []
        ii, jj = self.nodes[:, 0], self.nodes[:, 1]
        me = self.index[ii, jj]
        rows.append(me)
        cols.append(me)
        vals.append(np.full(n, 4.0 / h2))
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = ii + di, jj + dj
            ok = ((ni >= 0) & (ni < mask.shape[0])
                  & (nj >= 0) & (nj < mask.shape[1]))
            ok[ok] &= mask[ni[ok], nj[ok]]
            rows.append(me[ok])
            cols.append(self.index[ni[ok], nj[ok]])
            vals.append(np.full(int(np.sum(ok)), -1.0 / h2))
        A = sparse.csc_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        self.A = A
        self.lu = splu(A)

    def solve(self, rhs_grid: np.ndarray) -> np.ndarray:
        b = rhs_grid[self.region.Z_mask]
        x = self.lu.solve(b)
        out = np.zeros_like(rhs_grid, dtype=float)
        out[self.region.Z_mask] = x
        return out


def _solver_for(region: PlaneRegion) -> _Solver:
    if "solver" not in region._cache:
        region._cache["solver"] = _Solver(region)
    return region._cache["solver"]


def mollified_bump(region: PlaneRegion, center, width: float) -> np.ndarray:
    """C^2 bump with unit integral, supported in |x - center| < width."""
    XX, YY = region.grid
    r2 = ((XX - center[0]) ** 2 + (YY - center[1]) ** 2) / width ** 2
    prof = np.where(r2 < 1, (1 - r2) ** 3, 0.0)
    total = float(np.sum(prof)) * region.h ** 2
    if total <= 0:
        raise SchemaError("bump support resolves to no grid nodes")
    return prof / total


def green_solve(region: PlaneRegion, source: np.ndarray,
                require_support_in_Y: bool = False) -> GreenSolution:
    """-Laplace(phi) = source on Z, phi = 0 on the boundary nodes."""
    src = np.asarray(source, dtype=float)
    if src.shape != region.Z_mask.shape:
        raise SchemaError("source grid shape mismatch")
    if require_support_in_Y and np.any((src != 0) & ~region.Y_mask):
        raise SchemaError("source must be supported in Y")
    flags = []
    labels, ncomp = ndimage.label(region.Z_mask)
    for c in range(1, ncomp + 1):
        if not np.any((labels == c) & (src != 0)):
            flags.append(f"component-{c}-sourceless")
    solver = _solver_for(region)
    phi = solver.solve(src * region.Z_mask)
    res = solver.A @ phi[region.Z_mask] - (src * region.Z_mask)[region.Z_mask]
    scale = max(float(np.max(np.abs(src))), 1.0)
    residual = float(np.max(np.abs(res))) / scale
    if residual > 1e-8:
        raise InvariantFailure(f"solver residual {residual:.3g} above 1e-8")
    minv = float(np.min(phi[region.Z_mask])) if np.any(region.Z_mask) else 0.0
    if np.any(src < 0):
        flags.append("signed-source")
    elif minv < -1e-10 * max(float(np.max(phi)), 1.0):
        raise InvariantFailure(f"minimum principle violated: min {minv:.3g}")
    return GreenSolution(region=region, phi=phi, source=src,
                         residual=residual, flags=flags)


def green_regularity_probe(region: PlaneRegion, eta: float,
                           n_sources: int = 6, seed: int = 77) -> dict:
    """Probe the two Green-function properties: interior positivity and
    boundary decay of sup_y G(x, y) along x-sequences with delta(x) -> 0."""
    if not eta > 4 * region.h:
        raise SchemaError("eta must exceed 4 grid cells")
    edt = region.dist_to_boundary()
    deep = np.argwhere(region.Z_mask & (edt > eta))
    if len(deep) == 0:
        raise SchemaError("no nodes deeper than eta")
    rng = make_rng(seed, "green-probe")
    ys = deep[rng.choice(len(deep), size=min(n_sources, len(deep)),
                         replace=False)]
    solver = _solver_for(region)
    columns = []
    for iy, jy in ys:
        rhs = np.zeros_like(edt)
        rhs[iy, jy] = 1.0 / region.h ** 2    # unit point mass
        columns.append(solver.solve(rhs))
    # interior infimum over pairs separated by > eta/2
    inf_pair = math.inf
    for (iy, jy), col in zip(ys, columns):
        sel = (region.Z_mask & (edt > eta)
               & ((np.add.outer(region.ys - region.ys[iy],
                                np.zeros(len(region.xs))) ** 2
                   + np.add.outer(np.zeros(len(region.ys)),
                                  region.xs - region.xs[jy]) ** 2)
                  > (eta / 2) ** 2))
        if np.any(sel):
            inf_pair = min(inf_pair, float(np.min(col[sel])))
    # boundary decay trend: sup over sources of G(x, .) for x in delta
    # bands; x within eta/2 of a column's own source is excluded (the log
    # singularity there is not boundary behavior)
    XX, YY = region.grid
    trend = []
    dmax = float(np.max(edt))
    band = dmax / 2
    while band > 2 * region.h:
        sel = region.Z_mask & (edt <= band) & (edt > band / 2)
        if np.any(sel):
            sup = 0.0
            for (iy, jy), col in zip(ys, columns):
                d2 = (XX - region.xs[jy]) ** 2 + (YY - region.ys[iy]) ** 2
                m = sel & (d2 > (eta / 2) ** 2)
                if np.any(m):
                    sup = max(sup, float(np.max(col[m])))
            trend.append((band, sup))
        band /= 2
    return {"inf_interior": inf_pair, "trend": trend,
            "decreasing": all(a[1] >= b[1] - 1e-12
                              for a, b in zip(trend, trend[1:]))}


# ---------------------------------------------------------------------------
# Carleman weight
# ---------------------------------------------------------------------------

@dataclass
class CarlemanWeight:
    region: PlaneRegion
    phi: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    E_mask: np.ndarray
    gamma: float                 # <E>_Y
    c1: float
    rho: float
    C2: float                    # sup_Y phi_2
    S: float
    delta: float
    nu: float
    theta: float
    s_collar: float
    sstar: float
    laplacian: np.ndarray        # exact -chi_1 + rho chi_2 source values

    def cutoff(self) -> np.ndarray:
        """C^2 distance bump: 0 near the boundary, 1 on the deep interior
        Z'_s, quintic transition of width s/2 on [s/2, s]."""
        t = np.clip((self.region.dist_to_boundary() - self.s_collar / 2)
                    / (self.s_collar / 2), 0.0, 1.0)
        psi = t * t * t * (10 + t * (-15 + 6 * t))
        psi[~self.region.Z_mask] = 0.0
        return psi

    def describe(self) -> dict:
        return {"gamma": self.gamma, "c1": self.c1, "rho": self.rho,
                "S": self.S, "delta": self.delta, "nu": self.nu,
                "theta": self.theta, "s_collar": self.s_collar,
                "sstar": self.sstar}


def carleman_weight(region: PlaneRegion, E_mask: np.ndarray) -> CarlemanWeight:
    """phi = phi_1 - rho phi_2 with the mixing rho = c1 / (2 sup_Y phi_2).

    Sources: chi_1 = 1_E / <E>_Y and chi_2 = 1_Y; both solved with the
    region's shared factorization.  Constants follow the two-potential
    construction: c1 = inf_Y phi_1, delta = c1/2, S = sup_Y phi,
    nu = 2(S - delta), theta = delta/(nu + delta), and the collar s is the
    largest one with phi <= c1/4 on Z_s.
    """
    E_mask = np.asarray(E_mask, dtype=bool) & region.Y_mask
    if not np.any(E_mask):
        raise SchemaError("E has no grid mass")
    gamma = region.area(E_mask) / region.area(region.Y_mask)
    chi1 = E_mask.astype(float) / gamma
    chi2 = region.Y_mask.astype(float)
    g1 = green_solve(region, chi1)
    g2 = green_solve(region, chi2)
    c1 = float(np.min(g1.phi[region.Y_mask]))
    if c1 <= 0:
        raise InvariantFailure("inf_Y phi_1 <= 0: Y touches the boundary")
    C2 = float(np.max(g2.phi[region.Y_mask]))
    rho = c1 / (2 * C2)
    phi = g1.phi - rho * g2.phi
    S = float(np.max(phi[region.Y_mask]))
    delta = c1 / 2
    infY = float(np.min(phi[region.Y_mask]))
    if infY < delta - 1e-10 * abs(delta):
        raise InvariantFailure(f"inf_Y phi = {infY} below c1/2 = {delta}")
    nu = 2 * (S - delta)
    if not nu > 0:
        raise InvariantFailure("nu = 2(S - delta) not positive")
    theta = delta / (nu + delta)
    # largest collar on which phi stays below c1/4
    edt = region.dist_to_boundary()
    order = np.argsort(edt[region.Z_mask], kind="stable")
    vals = phi[region.Z_mask][order]
    depths = edt[region.Z_mask][order]
    run_max = np.maximum.accumulate(vals)
    ok = run_max <= c1 / 4 + 1e-12
    if np.all(ok):
        s_collar = float(depths[-1])
    else:
        first_bad = int(np.argmax(~ok))
        shallower = depths[depths < depths[first_bad]]
        s_collar = float(shallower.max()) if len(shallower) else 0.0
    if s_collar <= 0:
        raise InvariantFailure("no collar with phi <= c1/4")
    sstar = 1 + math.log(1 / gamma)
    lap = -chi1 + rho * chi2
    return CarlemanWeight(region=region, phi=phi, phi1=g1.phi, phi2=g2.phi,
                          E_mask=E_mask, gamma=gamma, c1=c1, rho=rho, C2=C2,
                          S=S, delta=delta, nu=nu, theta=theta,
                          s_collar=s_collar, sstar=sstar, laplacian=lap)


def sstar_regression(region: PlaneRegion, gammas: Sequence[float],
                     seed: int = 5150) -> dict:
    """S versus log(1/gamma) over nested subsets E of Y: slope and the
    per-point fitted constant for S <= C (1 + log(1/gamma))."""
    XX, YY = region.grid
    rows = []
    for g in gammas:
        if g >= 1:
            E = region.Y_mask
        else:
            # vertical slab through Y with the requested area fraction
            xs_in = XX[region.Y_mask]
            cut = np.quantile(xs_in, g)
            E = region.Y_mask & (XX <= cut)
        w = carleman_weight(region, E)
        rows.append({"gamma": w.gamma, "S": w.S, "sstar": w.sstar,
                     "c1": w.c1, "fitted_C": w.S / w.sstar})
    xs = np.array([math.log(1 / r["gamma"]) if r["gamma"] < 1 else 0.0
                   for r in rows])
    ys = np.array([r["S"] for r in rows])
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(rows) > 1 else 0.0
    return {"rows": rows, "slope": slope,
            "fitted_C": max(r["fitted_C"] for r in rows)}


# ---------------------------------------------------------------------------
# the inequality, h-optimization, three-sphere estimate
# ---------------------------------------------------------------------------

def _dbar(g: np.ndarray, h: float) -> np.ndarray:
    """(d/dx + i d/dy)/2 by central differences (zero-padded)."""
    gx = np.zeros_like(g)
    gy = np.zeros_like(g)
    gx[:, 1:-1] = (g[:, 2:] - g[:, :-2]) / (2 * h)
    gy[1:-1, :] = (g[2:, :] - g[:-2, :]) / (2 * h)
    return 0.5 * (gx + 1j * gy)


def carleman_check(weight: CarlemanWeight, h: float, g: np.ndarray,
                   tol_factor: float = 1e-3) -> dict:
    """lhs = 4 h^2 int e^{2 phi/h} |dbar g|^2 versus
    rhs = h int e^{2 phi/h} |g|^2 Laplacian(phi).

    The Laplacian uses the exact source values of the weight; exponentials
    are shifted by their maximum (the common factor cancels in the slack
    sign).  Returns shifted-scale values plus the shift.
    """
    region = weight.region
    g = np.asarray(g, dtype=complex)
    if g.shape != region.Z_mask.shape:
        raise SchemaError("test function grid shape mismatch")
    near = region.Z_mask & (region.dist_to_boundary() <= 4 * region.h)
    gmax = float(np.max(np.abs(g)))
    if gmax == 0:
        raise SchemaError("test function vanishes identically")
    if float(np.max(np.abs(g[near]))) > 1e-9 * gmax:
        raise SchemaError("g not supported 4 cells away from the boundary")
    shift = float(np.max(2 * weight.phi[region.Z_mask] / h))
    wgt = np.zeros_like(weight.phi)
    wgt[region.Z_mask] = np.exp(
        2 * weight.phi[region.Z_mask] / h - shift)
    db = _dbar(g, region.h)
    cell = region.h ** 2
    lhs = 4 * h * h * float(np.sum(wgt * np.abs(db) ** 2)) * cell
    rhs = h * float(np.sum(wgt * np.abs(g) ** 2 * weight.laplacian)) * cell
    slack = lhs - rhs
    # discretization allowance calibrated at a 512-node grid, halving on
    # refinement
    tol_disc = tol_factor * max(abs(rhs), abs(lhs), 1e-300) \
        * (512.0 / len(region.xs))
    return {"lhs": lhs, "rhs": rhs, "slack": slack, "tol_disc": tol_disc,
            "shift": shift, "ok": bool(slack >= -tol_disc)}


def optimize_h(A: float, B: float, Cconst: float, nu: float,
               delta: float) -> tuple:
    """Solve G(h0) = A/B for G(h) = (C h)^{-1} exp((nu+delta)/h), then
    return (h0, bound) with the exact product-form branch:
    h0 >= 1: bound = C^{-theta} e^{delta} B^theta A^{1-theta} (on int_Y);
    h0 <  1: bound = 2 C^{1-theta} B^theta A^{1-theta} (on rho int_Y).
    """
    if not (A >= B >= 0):
        raise SchemaError("need A >= B >= 0")
    theta = delta / (nu + delta)
    if B == 0:
        return math.nan, math.inf
    log_target = math.log(A) - math.log(B)

    def logG(h):
        return (nu + delta) / h - math.log(Cconst * h)

    lo, hi = 1e-12, 1e12
    while logG(hi) > log_target:
        hi *= 4
    while logG(lo) < log_target:
        lo /= 4
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if logG(mid) > log_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, lo):
            break
    h0 = 0.5 * (lo + hi)
    if h0 >= 1:
        bound = Cconst ** (-theta) * math.exp(delta) \
            * B ** theta * A ** (1 - theta)
    else:
        bound = 2 * Cconst ** (1 - theta) * B ** theta * A ** (1 - theta)
    return h0, bound


@dataclass
class DoublingIndex:
    N: float
    p: float
    z: complex
    r: float
    R: float


def doubling_index(f: Callable, z, r: float, R: float, p: float,
                   domain: geo.Domain = None) -> DoublingIndex:
    """N = log( ||f||_{L^p(Y(z,R))} / ||f||_{L^p(Y(z,r))} ) on the disc."""
    if not 0 < r < R < 1:
        raise SchemaError("need 0 < r < R < 1")
    if domain is None:
        domain = geo.unit_disc()
    inner = geo.kobayashi_ball(domain, z, r)
    outer = geo.kobayashi_ball(domain, z, R)

    def norm(ball):
        q = ball.local_quadrature(n_r=48, n_t=128)
        vals = np.abs(np.asarray(f(q.points)))
        if p == math.inf:
            return float(np.max(vals))
        return float(np.real(q.integrate(vals ** p))) ** (1.0 / p)

    lo = norm(inner)
    hi = norm(outer)
    if lo <= 0:
        raise ArithmeticError("vanishing inner norm")
    return DoublingIndex(N=math.log(hi / lo), p=p, z=complex(z), r=r, R=R)


def three_sphere_estimate(region: PlaneRegion, E_mask: np.ndarray,
                          ensemble) -> dict:
    """Per-function records of the local three-sphere comparison: averaged
    L^2 norms over Y and E, the doubling index N = log(||f||_X / ||f||_Y),
    the fitted constant making <f>_Y <= C exp(C (N+1) S*) <f>_E, and a
    regression of log(ratio) against (N+1) S*."""
    weight = carleman_weight(region, E_mask)
    pts = region.points
    cell = region.h ** 2
    areaY = region.area(region.Y_mask)
    areaE = region.area(weight.E_mask)
    areaX = region.area(region.X_mask)
    records = []
    for member in ensemble:
        vals = np.abs(np.asarray(member(pts.ravel())).reshape(pts.shape)) ** 2
        nX = math.sqrt(float(np.sum(vals[region.X_mask])) * cell)
        nY = math.sqrt(float(np.sum(vals[region.Y_mask])) * cell)
        nE = math.sqrt(float(np.sum(vals[weight.E_mask])) * cell)
        if nY <= 0 or nE <= 0:
            records.append({"label": member.label, "skipped": True})
            continue
        avgY = nY / math.sqrt(areaY)
        avgE = nE / math.sqrt(areaE)
        avgX = nX / math.sqrt(areaX)
        N = math.log(nX / nY)
        ratio = avgY / avgE
        x = (N + 1) * weight.sstar
        # smallest C with ratio <= C exp(C x); monotone in C
        lo, hi = 1e-9, 1.0
        while hi * math.exp(hi * x) < ratio:
            hi *= 2
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid * math.exp(mid * x) < ratio:
                lo = mid
            else:
                hi = mid
        records.append({"label": member.label, "avgY": avgY, "avgE": avgE,
                        "avgX": avgX, "N": N, "ratio": ratio,
                        "x": x, "fitted_C": hi, "skipped": False})
    live = [r for r in records if not r["skipped"]]
    fitted_C = max(r["fitted_C"] for r in live)
    violations = sum(1 for r in live
                     if r["ratio"] > fitted_C * math.exp(fitted_C * r["x"])
                     * (1 + 1e-9))
    xs = np.array([r["x"] for r in live])
    ys = np.array([math.log(r["ratio"]) for r in live])
    if len(live) > 2 and np.ptp(xs) > 0:
        slope, intercept = np.polyfit(xs, ys, 1)
        pred = slope * xs + intercept
        ss_res = float(np.sum((ys - pred) ** 2))
        ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
        r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 1.0
    else:
        slope, r2 = 0.0, 1.0
    return {"records": records, "fitted_C": fitted_C,
            "violations": violations, "slope": float(slope), "r2": float(r2),
            "sstar": weight.sstar, "constants": weight.describe()}


# ---------------------------------------------------------------------------
# n = 2 product-structure check
# ---------------------------------------------------------------------------

def carleman_check_product(weight: CarlemanWeight, h: float, f: Callable,
                           stride: int = 8, tol_factor: float = 5e-3) -> dict:
    """Per-variable Carleman inequality summed over the two variables, on
    the tensor grid of a coarsened plane region.

    phi(z1, z2) = phi(z1) + phi(z2); g = psi(z1) psi(z2) f(z1, z2); the
    sum over k of 4 h^2 |dbar_k g|^2 integrates against the same weight as
    |g|^2 (Lap_1 + Lap_2) phi.
    """
    region = weight.region
    sl = slice(None, None, stride)
    mask = region.Z_mask[sl, sl]
    phi = weight.phi[sl, sl]
    lap = weight.laplacian[sl, sl]
    psi = weight.cutoff()[sl, sl]
    xs = region.xs[sl]
    hh = xs[1] - xs[0]
    pts = region.points[sl, sl]
    n = mask.shape[0]
    Z1 = pts[:, :, None, None]
    Z2 = pts[None, None, :, :]
    F = np.asarray(f(Z1, Z2), dtype=complex)
    G = psi[:, :, None, None] * psi[None, None, :, :] * F
    M = mask[:, :, None, None] & mask[None, None, :, :]
    G = np.where(M, G, 0.0)
    PHI = phi[:, :, None, None] + phi[None, None, :, :]
    LAP = lap[:, :, None, None] + lap[None, None, :, :]
    shift = float(np.max(2 * PHI[M] / h)) if np.any(M) else 0.0
    W = np.where(M, np.exp(np.minimum(2 * PHI / h - shift, 0.0)), 0.0)

    def dbar_axis(arr, ax_pair):
        gx = np.zeros_like(arr)
        gy = np.zeros_like(arr)
        axx, axy = ax_pair
        slc = [slice(None)] * 4
        up = [slice(None)] * 4
        dn = [slice(None)] * 4
        slc[axx] = slice(1, -1)
        up[axx] = slice(2, None)
        dn[axx] = slice(None, -2)
        gx[tuple(slc)] = (arr[tuple(up)] - arr[tuple(dn)]) / (2 * hh)
        slc2 = [slice(None)] * 4
        up2 = [slice(None)] * 4
        dn2 = [slice(None)] * 4
        slc2[axy] = slice(1, -1)
        up2[axy] = slice(2, None)
        dn2[axy] = slice(None, -2)
        gy[tuple(slc2)] = (arr[tuple(up2)] - arr[tuple(dn2)]) / (2 * hh)
        return 0.5 * (gx + 1j * gy)

    # grid layout: axis 0/2 are y-rows, axis 1/3 x-columns per variable
    db1 = dbar_axis(G, (1, 0))
    db2 = dbar_axis(G, (3, 2))
    cell = hh ** 4
    lhs = 4 * h * h * float(np.sum(W * (np.abs(db1) ** 2
                                        + np.abs(db2) ** 2))) * cell
    rhs = h * float(np.sum(W * np.abs(G) ** 2 * LAP)) * cell
    slack = lhs - rhs
    tol = tol_factor * max(abs(lhs), abs(rhs), 1e-300)
    return {"lhs": lhs, "rhs": rhs, "slack": slack, "tol_disc": tol,
            "ok": bool(slack >= -tol), "grid": n}
