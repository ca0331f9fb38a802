"""Domain geometry for the invariant-metric machinery.

Domains are bounded sublevel sets {rho < 0} of a smooth defining function in
C^n (n = 1 or 2).  The disc and the Euclidean ball carry exact invariant
(Kobayashi) distances, ball shapes and volumes; ellipsoids and custom planar
domains fall back to a certified distance band built from a boundary gauge
calibrated against the exact twins, tightened by inclusion monotonicity
(enclosing ball below, quasi-hyperbolic segment integral above).

Points are numpy complex scalars/arrays for n = 1 and arrays of shape
(..., 2) for n = 2.  All sampled constructions take explicit seeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .util import BudgetError, derive_seed, make_rng

__all__ = [
    "Domain", "BoundaryGeometry", "DistanceBand", "PolydiscFrame",
    "KobayashiBall", "Quadrature", "Cover",
    "unit_disc", "unit_ball", "ellipsoid", "custom_domain",
    "boundary_distance", "kobayashi_distance", "distance_band_bulk",
    "kobayashi_ball", "ball_membership", "ball_volume",
    "polydisc_frame", "frame_constants", "make_quadrature",
    "graded_polar_quadrature", "cover_domain", "hyperbolic_lattice",
    "vitali_select", "delta_comparability", "collar_points",
]

IN, UNCERTAIN, OUT = 1, 0, -1


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass
class Domain:
    """Bounded pseudoconvex model domain {rho < 0}.

    kind: "disc" | "ball" | "ellipsoid" | "custom".
    axis_weights: weights c_k in rho = sum c_k |z_k|^2 - 1 for model kinds.
    rho/grad_rho: defining function and complex gradient for custom domains.
    """

    kind: str
    dim: int
    axis_weights: tuple = (1.0,)
    rho: Optional[Callable] = None
    grad_rho: Optional[Callable] = None
    bounding_radius: float = 1.0
    band_margin: float = 0.0       # calibrated half-width of the gauge band
    grad_max: float = 2.0          # fitted max |grad rho| (custom upper bounds)
    _cache: dict = field(default_factory=dict, repr=False)

    def rho_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind in ("disc", "ball", "ellipsoid"):
            w = np.asarray(self.axis_weights)
            if self.dim == 1:
                return (np.abs(z) ** 2) * w[0] - 1.0
            return np.sum(w * np.abs(z) ** 2, axis=-1) - 1.0
        return np.asarray(self.rho(z))

    def grad_rho_at(self, z) -> np.ndarray:
        """Real gradient identified with C^n (d/dx_k + i d/dy_k applied to rho)."""
        z = np.asarray(z, dtype=complex)
        if self.kind in ("disc", "ball", "ellipsoid"):
            w = np.asarray(self.axis_weights)
            return 2.0 * w * z if self.dim > 1 else 2.0 * w[0] * z
        if self.grad_rho is not None:
            return np.asarray(self.grad_rho(z))
        return _fd_grad(self.rho, z)

    def contains(self, z) -> np.ndarray:
        return self.rho_at(z) < 0

    def delta(self, z) -> np.ndarray:
        """Euclidean distance to the boundary, vectorized."""
        z = np.asarray(z, dtype=complex)
        if self.kind in ("disc", "ball"):
            r = np.abs(z) if self.dim == 1 else np.linalg.norm(z, axis=-1)
            return 1.0 - r
        if self.kind == "ellipsoid":
            d, _ = _ellipsoid_project(self, z)
            return d
        scalar = (z.shape == ())
        flat = np.atleast_1d(z).ravel()
        out = np.array([_custom_nearest(self, complex(p)).delta for p in flat])
        return out[0] if scalar else out.reshape(np.atleast_1d(z).shape)

    def delta_lower(self, z) -> np.ndarray:
        """Cheap lower bound on delta (exact except custom: |rho|/max|grad|)."""
        if self.kind == "custom":
            return np.maximum(-self.rho_at(z), 0.0) / self.grad_max
        return self.delta(z)

    def volume(self) -> float:
        """Lebesgue volume (exact for model kinds)."""
        if self.dim == 1 and self.kind == "disc":
            return math.pi / self.axis_weights[0]
        if self.kind in ("ball", "ellipsoid"):
            return (math.pi ** self.dim / math.factorial(self.dim)
                    / float(np.prod(self.axis_weights)))
        q = make_quadrature(self, scheme="tensor", resolution=10)
        return float(np.sum(q.weights))

    @property
    def exact_metric(self) -> bool:
        return self.kind in ("disc", "ball")

    def collar_threshold(self) -> float:
        """Largest eps such that |grad rho| >= half its boundary minimum on
        the collar {delta <= eps}; fitted once and cached."""
        if "collar" not in self._cache:
            self._cache["collar"] = _fit_collar(self)
        return self._cache["collar"]

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim,
                "axis_weights": list(self.axis_weights),
                "bounding_radius": self.bounding_radius,
                "band_margin": self.band_margin}


def unit_disc() -> Domain:
    return Domain(kind="disc", dim=1)


def unit_ball() -> Domain:
    return Domain(kind="ball", dim=2, axis_weights=(1.0, 1.0))


def ellipsoid(axis_weights=(1.0, 2.0)) -> Domain:
    w = tuple(float(c) for c in axis_weights)
    if len(w) != 2 or any(c <= 0 for c in w):
        raise ValueError("ellipsoid takes two positive axis weights")
    if w == (1.0, 1.0):
        return unit_ball()
    dom = Domain(kind="ellipsoid", dim=2, axis_weights=w,
                 bounding_radius=1.0 / math.sqrt(min(w)))
    dom.band_margin = _fit_band_margin(dim=2)
    return dom


def custom_domain(rho: Callable, grad_rho: Callable | None = None,
                  bounding_radius: float = 2.0) -> Domain:
    """Planar (n = 1) domain {rho < 0}; rho must accept numpy complex arrays."""
    dom = Domain(kind="custom", dim=1, rho=rho, grad_rho=grad_rho,
                 bounding_radius=bounding_radius)
    dom.band_margin = _fit_band_margin(dim=1)
    # fitted gradient cap for the quasi-hyperbolic upper bound
    pts = collar_points(dom, deltas=[1e-3, 0.05, 0.2], rays=32, seed=3)
    gmax = max(abs(dom.grad_rho_at(p)) for p in pts)
    dom.grad_max = 1.2 * float(gmax)
    return dom


def _fd_grad(rho, z, h=1e-7):
    z = np.asarray(z, dtype=complex)
    dx = (rho(z + h) - rho(z - h)) / (2 * h)
    dy = (rho(z + 1j * h) - rho(z - 1j * h)) / (2 * h)
    return dx + 1j * dy


# ---------------------------------------------------------------------------
# boundary distance
# ---------------------------------------------------------------------------

@dataclass
class BoundaryGeometry:
    delta: float
    point: np.ndarray | complex      # nearest boundary point
    normal: np.ndarray | complex     # outward unit complex normal at point
    unique: bool


def boundary_distance(domain: Domain, z) -> BoundaryGeometry:
    """Distance to the boundary with nearest point, normal, uniqueness flag."""
    if domain.kind == "disc":
        z = complex(z)
        if z == 0:
            return BoundaryGeometry(1.0, 1.0 + 0j, 1.0 + 0j, unique=False)
        p = z / abs(z)
        return BoundaryGeometry(1.0 - abs(z), p, p, unique=True)
    if domain.kind == "ball":
        z = np.asarray(z, dtype=complex)
        nz = float(np.linalg.norm(z))
        if nz == 0:
            p = np.array([1.0 + 0j, 0j])
            return BoundaryGeometry(1.0, p, p, unique=False)
        p = z / nz
        return BoundaryGeometry(1.0 - nz, p, p, unique=True)
    if domain.kind == "ellipsoid":
        return _ellipsoid_nearest(domain, np.asarray(z, dtype=complex))
    return _custom_nearest(domain, complex(z))


def _ellipsoid_project(domain: Domain, Z: np.ndarray):
    """Vectorized nearest-point projection onto the ellipsoid boundary.

    Returns (delta, Q) over the regular KKT branch, with singular branches
    (z_j = 0, ring minimizers) handled pointwise where they win.
    """
    Z = np.asarray(Z, dtype=complex)
    shape = Z.shape[:-1]
    flat = Z.reshape(-1, domain.dim)
    c = np.asarray(domain.axis_weights, dtype=float)
    az2 = np.abs(flat) ** 2
    cmax = float(np.max(c))

    def g(lam):
        return np.sum(c * az2 / (1.0 + lam[:, None] * c) ** 2, axis=1) - 1.0

    lo = np.full(len(flat), -1.0 / cmax + 1e-13)
    hi = np.zeros(len(flat))
    bad = g(lo) < 0        # regular bracket invalid (z_cmax-block nearly 0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        lo = np.where(gm > 0, mid, lo)
        hi = np.where(gm > 0, hi, mid)
    lam = 0.5 * (lo + hi)
    Q = flat / (1.0 + lam[:, None] * c)
    d = np.linalg.norm(Q - flat, axis=1)
    # near-axis points can sit on a singular (ring) branch: defer those to
    # the pointwise projection, which checks every branch
    near_axis = np.any(np.abs(flat) < 1e-13, axis=1) & (np.abs(flat).max(axis=1) > 0)
    redo = bad | near_axis
    if np.any(redo):
        for i in np.where(redo)[0]:
            bg = _ellipsoid_nearest(domain, flat[i])
            d[i] = bg.delta
            Q[i] = bg.point
    return d.reshape(shape), Q.reshape(Z.shape)


def _ellipsoid_nearest(domain: Domain, z: np.ndarray) -> BoundaryGeometry:
    """Pointwise KKT projection including singular (ring) branches."""
    c = np.asarray(domain.axis_weights, dtype=float)
    az2 = np.abs(z) ** 2
    best_d, best_q, unique = np.inf, None, True

    def g(lam):
        return float(np.sum(c * az2 / (1.0 + lam * c) ** 2) - 1.0)

    cmax = float(np.max(c))
    lo, hi = -1.0 / cmax + 1e-13, 0.0
    if g(lo) > 0 and g(hi) < 0:
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0:
                lo = mid
            else:
                hi = mid
        lam = 0.5 * (lo + hi)
        q = z / (1.0 + lam * c)
        best_d, best_q = float(np.linalg.norm(q - z)), q
    elif abs(g(0.0)) < 1e-14:
        best_d, best_q = 0.0, z.copy()
    for j in range(len(c)):
        if abs(z[j]) > 1e-13:
            continue
        q = np.zeros_like(z)
        feasible = True
        for k in range(len(c)):
            if k == j:
                continue
            if abs(c[k] - c[j]) < 1e-13:
                if abs(z[k]) > 1e-13:
                    feasible = False
                    break
                q[k] = 0.0
            else:
                q[k] = z[k] / (1.0 - c[k] / c[j])
        if not feasible:
            continue
        rem = 1.0 - float(np.sum(np.delete(c, j) * np.abs(np.delete(q, j)) ** 2))
        if rem < 0:
            continue
        q[j] = math.sqrt(rem / c[j])      # one representative of the ring
        d = float(np.linalg.norm(q - z))
        if d < best_d - 1e-12:
            best_d, best_q, unique = d, q, rem < 1e-14
        elif abs(d - best_d) <= 1e-12:
            unique = False
    if best_q is None:
        raise RuntimeError("ellipsoid projection failed")
    gq = domain.grad_rho_at(best_q)
    return BoundaryGeometry(best_d, best_q, gq / np.linalg.norm(gq), unique)


def _custom_nearest(domain: Domain, z: complex) -> BoundaryGeometry:
    """Damped Newton on the distance Lagrangian with seeded restarts."""
    rng = make_rng(0, "custom-nearest", repr(z))
    best_d, best_q = np.inf, None
    hits = []
    for trial in range(10):
        ang = 2 * math.pi * trial / 10 + float(rng.uniform(0, 0.2))
        u = complex(math.cos(ang), math.sin(ang))
        q = _ray_boundary(domain, z, u)
        if q is None:
            continue
        q = _newton_nearest(domain, z, q)
        if q is None:
            continue
        d = abs(q - z)
        hits.append((d, q))
        if d < best_d:
            best_d, best_q = d, q
    if best_q is None:
        raise RuntimeError("no boundary point found from any restart")
    unique = all(abs(q - best_q) < 1e-5 or d > best_d * (1 + 1e-6)
                 for d, q in hits)
    g = domain.grad_rho_at(best_q)
    return BoundaryGeometry(best_d, best_q, g / abs(g), unique)


def _ray_boundary(domain: Domain, z: complex, u: complex):
    """First boundary crossing along z + t u (bracket + bisection)."""
    step = 0.05
    t, t_hi = step, None
    limit = 4.0 * domain.bounding_radius
    while t <= limit:
        if float(domain.rho_at(z + t * u)) >= 0:
            t_hi = t
            break
        t += step
    if t_hi is None:
        return None
    t_lo = t_hi - step
    for _ in range(80):
        mid = 0.5 * (t_lo + t_hi)
        if float(domain.rho_at(z + mid * u)) < 0:
            t_lo = mid
        else:
            t_hi = mid
    return z + 0.5 * (t_lo + t_hi) * u


def _newton_nearest(domain: Domain, z: complex, q0: complex):
    """Solve q - z = lam grad rho(q), rho(q) = 0 by damped Newton in R^3."""
    zv = np.array([z.real, z.imag])
    g0 = complex(domain.grad_rho_at(q0))
    q = np.array([q0.real, q0.imag])
    lam = float(np.dot(q - zv, [g0.real, g0.imag]) / (abs(g0) ** 2 + 1e-30))

    def F(x):
        qq = complex(x[0], x[1])
        g = complex(domain.grad_rho_at(qq))
        return np.array([x[0] - zv[0] - x[2] * g.real,
                         x[1] - zv[1] - x[2] * g.imag,
                         float(domain.rho_at(qq))])

    x = np.array([q[0], q[1], lam])
    f = F(x)
    for _ in range(60):
        if np.linalg.norm(f) < 1e-12:
            break
        J = np.zeros((3, 3))
        h = 1e-7
        for k in range(3):
            xp = x.copy()
            xp[k] += h
            J[:, k] = (F(xp) - f) / h
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return None
        step = 1.0
        for _ in range(20):
            xn = x + step * dx
            fn = F(xn)
            if np.linalg.norm(fn) < np.linalg.norm(f):
                x, f = xn, fn
                break
            step *= 0.5
        else:
            break
    if abs(float(domain.rho_at(complex(x[0], x[1])))) > 1e-8:
        return None
    return complex(x[0], x[1])


def _fit_collar(domain: Domain) -> float:
    pts = collar_points(domain, deltas=[1e-4], rays=64, seed=7)
    bpts = [boundary_distance(domain, p).point for p in pts]
    m = min(float(np.linalg.norm(np.atleast_1d(domain.grad_rho_at(p))))
            for p in bpts)
    best = 0.02
    for eps in np.linspace(0.02, 0.9, 45):
        sample = collar_points(domain,
                               deltas=[eps * f for f in (0.25, 0.5, 0.9, 1.0)],
                               rays=24, seed=11)
        gn = [float(np.linalg.norm(np.atleast_1d(domain.grad_rho_at(p))))
              for p in sample]
        if sample and min(gn) >= 0.5 * m:
            best = eps
        else:
            break
    return float(best)


def collar_points(domain: Domain, deltas, rays: int = 16, seed: int = 0) -> list:
    """Deterministic collar sample: points at prescribed boundary distances
    along seeded ray directions (inward from the nearest boundary point)."""
    rng = make_rng(seed, "collar-rays", domain.kind, domain.axis_weights)
    pts = []
    if domain.dim == 1:
        angles = rng.uniform(0, 2 * math.pi, size=rays)
        for ang in angles:
            u = complex(math.cos(ang), math.sin(ang))
            b = _ray_boundary(domain, 0j, u)
            if b is None:
                continue
            nu = domain.grad_rho_at(b)
            nu /= abs(nu)
            for d in deltas:
                p = b - d * nu
                if float(domain.rho_at(p)) < 0:
                    pts.append(p)
    else:
        raw = rng.normal(size=(rays, 4))
        c = np.asarray(domain.axis_weights)
        for row in raw:
            u = row / np.linalg.norm(row)
            uc = np.array([u[0] + 1j * u[1], u[2] + 1j * u[3]])
            t = 1.0 / math.sqrt(float(np.sum(c * np.abs(uc) ** 2)))
            b = t * uc
            g = domain.grad_rho_at(b)
            nu = g / np.linalg.norm(g)
            for d in deltas:
                p = b - d * nu
                if float(domain.rho_at(p)) < 0:
                    pts.append(p)
    return pts


# ---------------------------------------------------------------------------
# invariant distance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceBand:
    lo: float
    hi: float

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


def _disc_dist(z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = np.abs(z - w)
    den = np.abs(1.0 - z * np.conj(w))
    return np.arctanh(np.clip(num / np.maximum(den, 1e-300), 0.0, 1.0 - 1e-16))


def _ball_dist(z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    ip = np.sum(z * np.conj(w), axis=-1)
    nz = np.sum(np.abs(z) ** 2, axis=-1)
    nw = np.sum(np.abs(w) ** 2, axis=-1)
    val = 1.0 - (1.0 - nz) * (1.0 - nw) / np.abs(1.0 - ip) ** 2
    return np.arctanh(np.sqrt(np.clip(val, 0.0, 1.0 - 1e-16)))


def exact_distance(domain: Domain, z, w) -> np.ndarray:
    if domain.kind == "disc":
        return _disc_dist(z, w)
    if domain.kind == "ball":
        return _ball_dist(z, w)
    raise ValueError("exact distance only on disc/ball")


def _box_gauge_terms(domain: Domain, p, nu, Q):
    """Vector of box-gauge values from boundary point p (normal nu) to Q."""
    if domain.dim == 1:
        return np.sqrt(np.abs(np.asarray(Q, dtype=complex) - complex(p)))
    diff = np.asarray(Q) - np.asarray(p)
    a = np.sum(diff * np.conj(np.asarray(nu)), axis=-1)
    tang = diff - a[..., None] * np.asarray(nu)
    return np.maximum(np.sqrt(np.abs(a)), np.linalg.norm(tang, axis=-1))


_BAND_CACHE: dict = {}


def _gauge_pair(domain: Domain, bz: BoundaryGeometry, bw: BoundaryGeometry):
    hz = math.sqrt(max(bz.delta, 1e-300))
    hw = math.sqrt(max(bw.delta, 1e-300))
    dbox = float(_box_gauge_terms(domain, bz.point, bz.normal,
                                  np.asarray(bw.point)[None] if domain.dim > 1
                                  else np.asarray([bw.point]))[0])
    return 2.0 * math.log((dbox + max(hz, hw)) / math.sqrt(hz * hw))


def _fit_band_margin(dim: int) -> float:
    """Calibrate the gauge band half-width against the exact twin metric,
    over collar pairs (the regime where the band is used)."""
    key = ("band", dim)
    if key in _BAND_CACHE:
        return _BAND_CACHE[key]
    twin = unit_disc() if dim == 1 else unit_ball()
    rng = make_rng(424242, "band-calibration", dim)
    worst = 0.0
    for _ in range(500):
        if dim == 1:
            t1 = 1.0 - 10 ** rng.uniform(-3, -0.3)
            t2 = 1.0 - 10 ** rng.uniform(-3, -0.3)
            z = t1 * np.exp(1j * rng.uniform(0, 2 * math.pi))
            w = t2 * np.exp(1j * rng.uniform(0, 2 * math.pi))
            z, w = complex(z), complex(w)
        else:
            u1, u2 = rng.normal(size=4), rng.normal(size=4)
            u1 /= np.linalg.norm(u1)
            u2 /= np.linalg.norm(u2)
            t1 = 1.0 - 10 ** rng.uniform(-3, -0.3)
            t2 = 1.0 - 10 ** rng.uniform(-3, -0.3)
            z = t1 * np.array([u1[0] + 1j * u1[1], u1[2] + 1j * u1[3]])
            w = t2 * np.array([u2[0] + 1j * u2[1], u2[2] + 1j * u2[3]])
        g = _gauge_pair(twin, boundary_distance(twin, z),
                        boundary_distance(twin, w))
        d = float(exact_distance(twin, z, w))
        worst = max(worst, abs(d - g))
    margin = 1.5 * worst + 0.2    # eccentricity headroom for non-twin domains
    _BAND_CACHE[key] = margin
    return margin


def _qh_upper(domain: Domain, z0, Z, n_panel: int = 48) -> np.ndarray:
    """Quasi-hyperbolic segment integral: upper bound for the invariant
    distance (inclusion of the inscribed ball at each segment point).

    Sound panelwise form: delta is 1-Lipschitz along the segment, so on a
    panel of half-length s the integral is at most 2 log(d_m / (d_m - s))
    with d_m the midpoint distance; panels with d_m <= s (or midpoints
    outside the domain) make the bound infinite.
    """
    Z = np.asarray(Z, dtype=complex)
    z0 = np.asarray(z0, dtype=complex)
    t = (np.arange(n_panel) + 0.5) / n_panel
    if domain.dim == 1:
        seg = z0 + t[:, None] * (Z[None, :] - z0)     # (panels, N)
        L = np.abs(Z - z0)
    else:
        seg = z0[None, None, :] + t[:, None, None] * (Z[None, :, :] - z0)
        L = np.linalg.norm(Z - z0, axis=-1)
    inside = domain.rho_at(seg) < 0
    dm = np.asarray(domain.delta_lower(seg), dtype=float)
    s = (L / (2.0 * n_panel))[None, :]
    ok = np.all(inside & (dm > s), axis=0)
    dm = np.maximum(dm, 1e-300)
    ratio = np.maximum(dm / np.maximum(dm - s, 1e-300), 1.0)
    vals = 2.0 * np.sum(np.log(ratio), axis=0)
    return np.where(ok, vals, np.inf)


def distance_band_bulk(domain: Domain, z0, Z, use_gauge: bool = True):
    """Vectorized invariant-distance bands from a fixed point z0 to points Z.

    Returns (lo, hi) arrays.  Exact domains return lo == hi.
    """
    Z = np.asarray(Z, dtype=complex)
    if domain.kind == "disc":
        d = _disc_dist(Z, complex(z0))
        return d, d.copy()
    if domain.kind == "ball":
        d = _ball_dist(Z, np.asarray(z0))
        return d, d.copy()
    R = domain.bounding_radius
    if domain.dim == 1:
        lo = _disc_dist(Z / R, complex(z0) / R)
    else:
        lo = _ball_dist(Z / R, np.asarray(z0) / R)
    hi = _qh_upper(domain, z0, Z)
    if use_gauge and domain.kind == "ellipsoid":
        b0 = boundary_distance(domain, z0)
        dQ, Q = _ellipsoid_project(domain, Z)
        h0 = math.sqrt(max(b0.delta, 1e-300))
        hZ = np.sqrt(np.maximum(dQ, 1e-300))
        dbox = _box_gauge_terms(domain, b0.point, b0.normal, Q)
        g = 2.0 * np.log((dbox + np.maximum(h0, hZ)) / np.sqrt(h0 * hZ))
        C = domain.band_margin
        lo = np.maximum(lo, g - C)
        hi = np.minimum(hi, g + C)
    bad = lo > hi
    if np.any(bad):
        mid = 0.5 * (lo + hi)
        lo = np.where(bad, mid, lo)
        hi = np.where(bad, mid, hi)
    return lo, hi


def kobayashi_distance(domain: Domain, z, w) -> DistanceBand:
    """Invariant distance: exact on disc/ball, a certified band elsewhere."""
    if domain.kind == "disc":
        d = float(_disc_dist(complex(z), complex(w)))
        return DistanceBand(d, d)
    if domain.kind == "ball":
        d = float(_ball_dist(np.asarray(z), np.asarray(w)))
        return DistanceBand(d, d)
    if domain.kind == "custom":
        # scalar path affords the Newton boundary projections for the gauge
        bz = boundary_distance(domain, complex(z))
        bw = boundary_distance(domain, complex(w))
        g = _gauge_pair(domain, bz, bw)
        C = domain.band_margin
        R = domain.bounding_radius
        lo = max(0.0, g - C, float(_disc_dist(complex(z) / R, complex(w) / R)))
        hi = min(g + C, float(_qh_upper(domain, complex(z),
                                        np.asarray([complex(w)]))[0]))
        if lo > hi:
            lo = hi = 0.5 * (lo + hi)
        return DistanceBand(lo, hi)
    shp = np.asarray(w)[None] if domain.dim > 1 else np.asarray([complex(w)])
    lo, hi = distance_band_bulk(domain, z, shp)
    return DistanceBand(float(np.maximum(lo[0], 0.0)), float(hi[0]))


# ---------------------------------------------------------------------------
# Kobayashi balls
# ---------------------------------------------------------------------------

@dataclass
class KobayashiBall:
    """Invariant ball Y(center, r) with exact Euclidean shape where available."""

    domain: Domain
    center: np.ndarray | complex
    r: float
    euclid_center: np.ndarray | complex | None = None
    euclid_radius: float | None = None        # disc only
    axes: np.ndarray | None = None            # ball only: semi-axes [normal, tang]
    _vol: tuple | None = None

    @property
    def volume(self) -> float:
        return self.volume_with_error()[0]

    def volume_with_error(self) -> tuple:
        if self._vol is None:
            self._vol = _mc_ball_volume(self.domain, self)
        return self._vol

    def membership(self, pts) -> np.ndarray:
        """Tri-state membership: 1 in, -1 out, 0 uncertain (band domains)."""
        dom = self.domain
        if dom.kind == "disc":
            inside = np.abs(np.asarray(pts, dtype=complex) - self.euclid_center) \
                < self.euclid_radius
            return np.where(inside, IN, OUT)
        if dom.kind == "ball":
            d = _ball_dist(np.asarray(pts, dtype=complex), np.asarray(self.center))
            return np.where(d < math.atanh(self.r), IN, OUT)
        t = math.atanh(self.r)
        lo, hi = distance_band_bulk(dom, self.center, pts)
        return np.where(hi < t, IN, np.where(lo > t, OUT, UNCERTAIN))

    def sample(self, n: int, seed: int) -> np.ndarray:
        """Uniform sample (exact for disc/ball; rejection on the certain core
        for band domains)."""
        rng = make_rng(seed, "ball-sample", repr(self.center), self.r)
        dom = self.domain
        if dom.kind == "disc":
            u = np.sqrt(rng.uniform(0, 1, n))
            th = rng.uniform(0, 2 * math.pi, n)
            return self.euclid_center + self.euclid_radius * u * np.exp(1j * th)
        if dom.kind == "ball":
            x = rng.normal(size=(n, 4))
            x *= (rng.uniform(0, 1, n) ** 0.25 / np.linalg.norm(x, axis=1))[:, None]
            zc = np.stack([x[:, 0] + 1j * x[:, 1], x[:, 2] + 1j * x[:, 3]], axis=1)
            U = _normal_unitary(np.asarray(self.center))
            scaled = zc * np.array([self.axes[0], self.axes[1]])
            return (U.conj().T @ scaled.T).T + self.euclid_center
        proposal = _enclosing_ball(dom, self.center, self.r)
        pts, need = [], n
        batch = max(4 * n, 256)
        for k in range(400):
            if need <= 0:
                break
            cand = proposal.sample(batch, seed=derive_seed(seed, "prop", k))
            cand = cand[dom.rho_at(cand) < 0]
            if len(cand) == 0:
                continue
            m = self.membership(cand)
            good = cand[m == IN]
            pts.append(good[:need])
            need -= len(good[:need])
        if need > 0:
            raise RuntimeError("rejection sampling starved (band too wide?)")
        return np.concatenate(pts)[:n]

    def local_quadrature(self, n_r: int = 24, n_t: int = 64) -> "Quadrature":
        """Polar product rule over the exact Euclidean disc (n = 1 only)."""
        if self.domain.kind != "disc":
            raise ValueError("local quadrature only for disc balls")
        xr, wr = roots_legendre(n_r)
        t = 0.5 * (xr + 1) * self.euclid_radius
        wt = 0.5 * wr * self.euclid_radius
        th = (np.arange(n_t) + 0.5) * 2 * math.pi / n_t
        pts = self.euclid_center + t[:, None] * np.exp(1j * th)[None, :]
        w = np.broadcast_to(((wt * t) * (2 * math.pi / n_t))[:, None],
                            pts.shape).copy()
        return Quadrature(points=pts.ravel(), weights=w.ravel(),
                          scheme="ball-polar", resolution=(n_r, n_t),
                          est_rel_err=1e-12)

    def mc_quadrature(self, n: int, seed: int) -> "Quadrature":
        """Seeded uniform-sample rule over the ball (any domain kind)."""
        pts = self.sample(n, seed)
        vol = self.volume if self.domain.kind in ("disc", "ball") \
            else self.volume_with_error()[0]
        w = np.full(n, vol / n)
        return Quadrature(points=pts, weights=w, scheme="ball-mc",
                          resolution=n, est_rel_err=1.0 / math.sqrt(n), seed=seed)


def _normal_unitary(w: np.ndarray) -> np.ndarray:
    """Unitary whose first row is the conjugate unit direction of w (n = 2)."""
    nw = np.linalg.norm(w)
    if nw < 1e-14:
        return np.eye(2, dtype=complex)
    nu = w / nw
    tau = np.array([-np.conj(nu[1]), np.conj(nu[0])])
    return np.stack([np.conj(nu), np.conj(tau)])


def kobayashi_ball(domain: Domain, center, r: float) -> KobayashiBall:
    """Invariant ball of pseudo-radius r in (0, 1)."""
    if not (0 < r < 1):
        raise ValueError("pseudo-radius must lie in (0, 1)")
    if domain.kind == "disc":
        w = complex(center)
        den = 1.0 - r * r * abs(w) ** 2
        c = w * (1 - r * r) / den
        s = r * (1 - abs(w) ** 2) / den
        b = KobayashiBall(domain, w, r, euclid_center=c, euclid_radius=s)
        b._vol = (math.pi * s * s, 0.0)
        return b
    if domain.kind == "ball":
        a = np.asarray(center, dtype=complex)
        na2 = float(np.sum(np.abs(a) ** 2))
        den = 1.0 - r * r * na2
        c = a * (1 - r * r) / den
        rho = (1.0 - na2) / den
        axes = np.array([r * rho, r * math.sqrt(rho)])
        b = KobayashiBall(domain, a, r, euclid_center=c, axes=axes)
        b._vol = (float((math.pi ** 2 / 2.0) * axes[0] ** 2 * axes[1] ** 2), 0.0)
        return b
    return KobayashiBall(domain, np.asarray(center, dtype=complex)
                         if domain.dim > 1 else complex(center), r)


def _enclosing_ball(domain: Domain, center, r: float) -> KobayashiBall:
    """Exact Kobayashi ball of the enclosing disc/ball of radius
    bounding_radius: it contains Y(center, r) since domain inclusion only
    increases the invariant distance."""
    R = domain.bounding_radius
    twin = unit_disc() if domain.dim == 1 else unit_ball()
    if domain.dim == 1:
        inner = kobayashi_ball(twin, complex(center) / R, r)
        inner.euclid_center *= R
        inner.euclid_radius *= R
        inner._vol = (math.pi * inner.euclid_radius ** 2, 0.0)
    else:
        inner = kobayashi_ball(twin, np.asarray(center) / R, r)
        inner.euclid_center = inner.euclid_center * R
        inner.axes = inner.axes * R
        inner._vol = (float((math.pi ** 2 / 2.0)
                            * inner.axes[0] ** 2 * inner.axes[1] ** 2), 0.0)
    return inner


def _mc_ball_volume(domain: Domain, ball: KobayashiBall, n: int = 8000):
    proposal = _enclosing_ball(domain, ball.center, ball.r)
    cand = proposal.sample(n, seed=derive_seed(1301, "ball-volume",
                                               repr(ball.center), ball.r))
    inside = domain.rho_at(cand) < 0
    m = np.full(len(cand), OUT)
    if np.any(inside):
        m[inside] = ball.membership(cand[inside])
    prop_vol = proposal.volume
    p_in = float(np.mean(m == IN))
    p_unc = float(np.mean(m == UNCERTAIN))
    vol = prop_vol * (p_in + 0.5 * p_unc)
    err = prop_vol * (math.sqrt(max(p_in * (1 - p_in), 1e-12) / n) + 0.5 * p_unc)
    return float(vol), float(err)


def ball_membership(domain: Domain, z, w, r: float) -> int:
    """Tri-state membership of w in Y(z, r): 1 in, -1 out, 0 uncertain."""
    t = math.atanh(r)
    band = kobayashi_distance(domain, z, w)
    if band.hi < t:
        return IN
    if band.lo > t:
        return OUT
    return UNCERTAIN


class QuadratureTooCoarse(RuntimeError):
    """Volume error bar exceeds the acceptable fraction of the value."""


def ball_volume(domain: Domain, center, r: float, quad: "Quadrature" = None):
    """Volume of Y(center, r) with an error bound (0 where exact).

    quad: optional Monte Carlo rule whose resolution/seed drive the estimate
    on band domains.  Raises QuadratureTooCoarse when the bound exceeds 10%.
    """
    ball = kobayashi_ball(domain, center, r)
    if domain.exact_metric or quad is None:
        vol, err = ball.volume_with_error()
    else:
        if quad.scheme not in ("monte-carlo", "ball-mc"):
            raise ValueError("band-domain volumes use a Monte Carlo rule")
        n = quad.resolution if isinstance(quad.resolution, int) else 8000
        vol, err = _mc_ball_volume(domain, ball, n=int(n))
    if vol > 0 and err > 0.10 * vol:
        raise QuadratureTooCoarse(
            f"volume error bar {err:.3g} exceeds 10% of value {vol:.3g}")
    return vol, err


# ---------------------------------------------------------------------------
# polydisc frames
# ---------------------------------------------------------------------------

@dataclass
class PolydiscFrame:
    """Boundary-adapted frame at w: unitary sending the complex normal to the
    first coordinate, with fitted inner/outer polydisc radii for Y(w, r)."""

    center: np.ndarray | complex
    delta: float
    U: np.ndarray                  # (n, n) unitary; u = U @ (z - w)
    r: float
    inner: tuple                   # (r1, r2): P(inner) inside Y(w, r)
    outer: tuple                   # (R1, R2): Y(w, r) inside P(outer)

    def to_frame(self, pts):
        if self.U.shape == (1, 1):
            return (np.asarray(pts, dtype=complex) - self.center) * self.U[0, 0]
        diff = np.asarray(pts, dtype=complex) - np.asarray(self.center)
        return (self.U @ diff.reshape(-1, 2).T).T.reshape(diff.shape)

    def from_frame(self, u):
        if self.U.shape == (1, 1):
            return np.asarray(u, dtype=complex) / self.U[0, 0] + self.center
        uu = np.asarray(u, dtype=complex)
        return (self.U.conj().T @ uu.reshape(-1, 2).T).T.reshape(uu.shape) \
            + np.asarray(self.center)

    def outer_box_volume(self) -> float:
        R1, R2 = self.outer
        if self.U.shape == (1, 1):
            return math.pi * R1 ** 2
        return (math.pi * R1 ** 2) * (math.pi * R2 ** 2)

    def sample_outer_box(self, rng, n: int):
        R1, R2 = self.outer
        u1 = R1 * np.sqrt(rng.uniform(0, 1, n)) \
            * np.exp(1j * rng.uniform(0, 2 * math.pi, n))
        if self.U.shape == (1, 1):
            return self.from_frame(u1)
        u2 = R2 * np.sqrt(rng.uniform(0, 1, n)) \
            * np.exp(1j * rng.uniform(0, 2 * math.pi, n))
        return self.from_frame(np.stack([u1, u2], axis=1))


def polydisc_frame(domain: Domain, w, r: float) -> PolydiscFrame:
    bg = boundary_distance(domain, w)
    if domain.dim == 1:
        U = np.array([[np.conj(bg.normal)]], dtype=complex)
    else:
        U = _normal_unitary(np.asarray(bg.normal))
    a, b, A, B = frame_constants(domain, r)
    d = max(bg.delta, 1e-300)
    tau = math.atanh(r)
    return PolydiscFrame(center=w if domain.dim > 1 else complex(w),
                         delta=bg.delta, U=U, r=r,
                         inner=(a * d, b * math.sqrt(d)),
                         outer=(A * tau * d, B * tau * math.sqrt(d)))


def frame_constants(domain: Domain, r: float) -> tuple:
    """Fitted (a, b, A, B): inner polydisc scales (times delta, sqrt(delta))
    and outer scales (times atanh(r) delta, atanh(r) sqrt(delta)), calibrated
    over a collar grid and cached per radius."""
    key = ("frame", round(r, 6))
    if key in domain._cache:
        return domain._cache[key]
    tau = math.atanh(r)
    if domain.kind == "custom":
        deltas = [2.0 ** (-j) for j in range(2, 6)]
        rays = 4
    elif domain.kind == "ellipsoid":
        deltas = [2.0 ** (-j) for j in range(2, 7)]
        rays = 6
    else:
        deltas = [2.0 ** (-j) for j in range(2, 9)]
        rays = 8 if domain.dim == 1 else 12
    centers = collar_points(domain, deltas, rays=rays, seed=23)
    a_fit, A_fit, B_fit = np.inf, 0.0, 0.0
    for w in centers:
        bg = boundary_distance(domain, w)
        d = bg.delta
        if domain.dim == 1:
            U = np.array([[np.conj(bg.normal)]], dtype=complex)
        else:
            U = _normal_unitary(np.asarray(bg.normal))
        base = PolydiscFrame(center=w if domain.dim > 1 else complex(w),
                             delta=d, U=U, r=r, inner=(1, 1), outer=(1, 1))

        def certainly_in(pts):
            lo, hi = distance_band_bulk(domain, w, pts)
            return np.all((hi < tau) & (domain.rho_at(pts) < 0))

        stencil = _polydisc_stencil(domain.dim)
        lo_s, hi_s = 0.0, 4.0
        for _ in range(30):
            mid = 0.5 * (lo_s + hi_s)
            if domain.dim == 1:
                pts = base.from_frame(stencil * (mid * d))
            else:
                pts = base.from_frame(stencil
                                      * np.array([mid * d, mid * math.sqrt(d)]))
            inside = np.all(domain.rho_at(pts) < 0)
            if inside and certainly_in(pts):
                lo_s = mid
            else:
                hi_s = mid
        a_fit = min(a_fit, lo_s)
        dirs = _direction_stencil(domain.dim, seed=5)
        t_lo = np.zeros(len(dirs))
        t_hi = np.full(len(dirs), 4.0)
        for _ in range(36):
            t_mid = 0.5 * (t_lo + t_hi)
            if domain.dim == 1:
                pts = base.from_frame(dirs * t_mid)
            else:
                pts = base.from_frame(dirs * t_mid[:, None])
            inside = domain.rho_at(pts) < 0
            blo = np.full(len(dirs), np.inf)
            if np.any(inside):
                blo_in, _ = distance_band_bulk(domain, w, pts[inside])
                blo[inside] = blo_in
            grow = inside & (blo <= tau)
            t_lo = np.where(grow, t_mid, t_lo)
            t_hi = np.where(grow, t_hi, t_mid)
        exits = np.atleast_2d((dirs * t_hi) if domain.dim == 1
                              else dirs * t_hi[:, None])
        if domain.dim == 1:
            A_fit = max(A_fit, float(np.max(np.abs(exits))) / (tau * d))
        else:
            A_fit = max(A_fit, float(np.max(np.abs(exits[:, 0]))) / (tau * d))
            B_fit = max(B_fit,
                        float(np.max(np.abs(exits[:, 1]))) / (tau * math.sqrt(d)))
    b_fit = a_fit
    if domain.dim == 1:
        B_fit = A_fit
    # shrink/inflate to absorb centers and directions off the fitting grid
    out = (0.9 * float(a_fit), 0.9 * float(b_fit),
           1.1 * float(max(A_fit, 1.0)), 1.1 * float(max(B_fit, 1.0)))
    domain._cache[key] = out
    return out


def _polydisc_stencil(dim: int) -> np.ndarray:
    """Sample stencil of the closed unit polydisc (boundary plus interior
    rings, so nonconvex certified regions are probed inside too)."""
    ph = np.exp(1j * 2 * math.pi * np.arange(8) / 8)
    if dim == 1:
        ph16 = np.exp(1j * 2 * math.pi * np.arange(16) / 16)
        return np.concatenate([ph16, 0.6 * ph, 0.3 * ph])
    pts = []
    for p1 in ph:
        for m2, phases2 in ((0.0, [1.0]), (0.5, ph), (1.0, ph)):
            for p2 in phases2:
                pts.append([p1, m2 * p2])
    for p2 in ph:
        for m1, phases1 in ((0.0, [1.0]), (0.5, ph)):
            for p1 in phases1:
                pts.append([m1 * p1, p2])
    return np.asarray(pts, dtype=complex)


def _direction_stencil(dim: int, seed: int) -> np.ndarray:
    rng = make_rng(seed, "frame-directions", dim)
    if dim == 1:
        ang = np.linspace(0, 2 * math.pi, 32, endpoint=False) + rng.uniform(0, 0.1)
        return np.exp(1j * ang)
    raw = rng.normal(size=(48, 4))
    raw /= np.linalg.norm(raw, axis=1)[:, None]
    dirs = np.stack([raw[:, 0] + 1j * raw[:, 1], raw[:, 2] + 1j * raw[:, 3]],
                    axis=1)
    axes = np.array([[1, 0], [1j, 0], [0, 1], [0, 1j]], dtype=complex)
    return np.concatenate([axes, dirs])


def delta_comparability(domain: Domain, r: float, seed: int = 99) -> float:
    """Fitted D(r): max two-sided ratio of boundary distances over Y(w, r).

    The fitting set includes the radial extremal pairs (center paired with
    the geodesic endpoints of Y toward and away from the boundary), which
    realize the supremum on the exact domains.
    """
    key = ("dcomp", round(r, 6))
    if key in domain._cache:
        return domain._cache[key]
    worst = 1.0
    centers = collar_points(domain, [2.0 ** (-j) for j in range(1, 8)],
                            rays=8, seed=seed)
    for w in centers:
        ball = kobayashi_ball(domain, w, r)
        pts = list(ball.sample(200, seed=derive_seed(seed, "dcomp", repr(w))))
        if domain.kind == "disc":
            t = abs(w)
            u = w / t if t > 0 else 1.0
            pts += [u * (t + r) / (1 + t * r), u * (t - r) / (1 - t * r)]
        elif domain.kind == "ball":
            t = float(np.linalg.norm(w))
            if t > 0:
                u = np.asarray(w) / t
                pts += [u * (t + r) / (1 + t * r), u * (t - r) / (1 - t * r)]
        dw = float(domain.delta(w))
        dpts = np.asarray(domain.delta(np.asarray(pts)), dtype=float)
        worst = max(worst, float(np.max(dw / dpts)), float(np.max(dpts / dw)))
    out = 1.05 * worst
    domain._cache[key] = out
    return out


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass
class Quadrature:
    """Positive rule for plain Lebesgue integration over its support.

    Weighted integrals multiply node values by |rho|^alpha explicitly; polar
    and duffy rules built with alpha_hint fold the Jacobi weight back out of
    the node weights so that this product is exact for that alpha.
    """

    points: np.ndarray
    weights: np.ndarray
    scheme: str
    resolution: tuple | int
    est_rel_err: float
    seed: int | None = None

    def integrate(self, values: np.ndarray) -> complex:
        return complex(np.sum(self.weights * values))


def make_quadrature(domain: Domain, scheme: str = "auto", resolution: int = 9,
                    seed: int = 0, alpha_hint: float = 0.0,
                    n_radial: int = 128, n_angular: int = 512) -> Quadrature:
    """Build a quadrature for the domain.

    scheme: "polar" (disc product rule), "polar-graded" (disc rule with
    panels accumulating at the rim), "duffy" (ball/ellipsoid product
    rule), "tensor" (masked midpoint grid with 2^resolution cells per real
    dimension), "monte-carlo" (seeded; 4^resolution points), or "auto".
    """
    if scheme == "auto":
        scheme = {"disc": "polar", "ball": "duffy",
                  "ellipsoid": "duffy", "custom": "tensor"}[domain.kind]
    if scheme == "polar":
        if domain.kind != "disc":
            raise ValueError("polar rule requires the disc")
        return _polar_quadrature(alpha_hint, n_radial, n_angular)
    if scheme == "polar-graded":
        if domain.kind != "disc":
            raise ValueError("graded polar rule requires the disc")
        return graded_polar_quadrature(n_angular=n_angular)
    if scheme == "duffy":
        if domain.kind not in ("ball", "ellipsoid"):
            raise ValueError("duffy rule requires ball/ellipsoid")
        return _duffy_quadrature(domain, alpha_hint, n_radial, n_angular)
    if scheme == "tensor":
        return _tensor_quadrature(domain, resolution)
    if scheme == "monte-carlo":
        return _mc_quadrature(domain, resolution, seed)
    raise ValueError(f"unknown scheme {scheme!r}")


def _jacobi_radial(alpha: float, n_radial: int):
    """Nodes/weights in u = |z|^2 over (0,1) representing plain du, exact for
    polynomials times (1-u)^alpha."""
    if alpha == 0:
        xu, wu = roots_legendre(n_radial)
        u = 0.5 * (xu + 1)
        wu = 0.5 * wu
    else:
        xu, wu = roots_jacobi(n_radial, alpha, 0.0)
        u = 0.5 * (xu + 1)
        # map [-1,1] -> [0,1]: (1-x)^alpha dx = 2^alpha (1-u)^alpha 2 du
        wu = wu * 0.5 ** (alpha + 1)
        wu = wu / (1.0 - u) ** alpha
    return u, wu


def _polar_quadrature(alpha: float, n_radial: int, n_angular: int) -> Quadrature:
    """Disc product rule: exact for z^j conj(z)^k (1-|z|^2)^alpha with
    j + k <= 4 n_radial - 2 and j - k not a nonzero multiple of n_angular."""
    u, wu = _jacobi_radial(alpha, n_radial)
    th = 2 * math.pi * np.arange(n_angular) / n_angular
    pts = np.sqrt(u)[:, None] * np.exp(1j * th)[None, :]
    w = np.broadcast_to((wu * 0.5 * (2 * math.pi / n_angular))[:, None],
                        pts.shape).copy()
    # dA = (1/2) du dtheta; the constant function is only near-exact when
    # alpha != 0 (the folded-out weight is not a polynomial), so report it
    err = max(1e-14, abs(float(np.sum(w)) - math.pi) / math.pi * 1.2)
    return Quadrature(points=pts.ravel(), weights=w.ravel(),
                      scheme="polar", resolution=(n_radial, n_angular),
                      est_rel_err=err)


def graded_polar_quadrature(levels: int = 14, n_panel: int = 16,
                            n_angular: int = 1024) -> Quadrature:
    """Disc rule with radius panels geometrically graded toward |z| = 1, for
    kernel-power integrands concentrated near the boundary."""
    edges = [0.0, 0.5] + [1.0 - 2.0 ** (-j) for j in range(2, levels + 2)] + [1.0]
    xr, wr = roots_legendre(n_panel)
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ts.append(0.5 * (b - a) * (xr + 1) + a)
        ws.append(0.5 * (b - a) * wr)
    t = np.concatenate(ts)
    wt = np.concatenate(ws)
    th = 2 * math.pi * np.arange(n_angular) / n_angular
    pts = t[:, None] * np.exp(1j * th)[None, :]
    w = np.broadcast_to(((wt * t) * (2 * math.pi / n_angular))[:, None],
                        pts.shape).copy()
    return Quadrature(points=pts.ravel(), weights=w.ravel(),
                      scheme="polar-graded", resolution=(len(t), n_angular),
                      est_rel_err=1e-10)


def _duffy_quadrature(domain: Domain, alpha: float, n_radial: int,
                      n_angular: int) -> Quadrature:
    """Ball/ellipsoid product rule via |z1|^2 = uv, |z2|^2 = u(1-v)."""
    n_u = min(n_radial, 48)
    n_v = max(8, n_u // 2)
    n_t = min(n_angular, 48)
    u, wu = _jacobi_radial(alpha, n_u)
    xv, wv = roots_legendre(n_v)
    v = 0.5 * (xv + 1)
    wv = 0.5 * wv
    th = 2 * math.pi * np.arange(n_t) / n_t
    wth = 2 * math.pi / n_t
    U, V, T1, T2 = np.meshgrid(u, v, th, th, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    z1 = np.sqrt(U * V) * np.exp(1j * T1)
    z2 = np.sqrt(U * (1 - V)) * np.exp(1j * T2)
    # dA x dA = (1/4) dt1 dt2 dth1 dth2 with t1 t2 = |z1|^2 |z2|^2, and
    # dt1 dt2 = u du dv under t1 = uv, t2 = u(1-v)
    w4 = (WU * WV)[..., None, None] * U * 0.25 * wth * wth
    c = np.asarray(domain.axis_weights)
    pts = np.stack([z1.ravel() / math.sqrt(c[0]),
                    z2.ravel() / math.sqrt(c[1])], axis=1)
    wts = w4.ravel() / float(np.prod(c))
    vol = domain.volume()
    err = max(1e-13, abs(float(np.sum(wts)) - vol) / vol * 1.2)
    return Quadrature(points=pts, weights=wts, scheme="duffy",
                      resolution=(n_u, n_v, n_t), est_rel_err=err)


def _tensor_quadrature(domain: Domain, resolution: int) -> Quadrature:
    n = 2 ** resolution
    R = domain.bounding_radius
    xs = (np.arange(n) + 0.5) * (2 * R / n) - R
    if domain.dim == 1:
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        pts = (X + 1j * Y).ravel()
        pts = pts[domain.rho_at(pts) < 0]
        w = np.full(pts.shape, (2 * R / n) ** 2)
    else:
        X1, Y1, X2, Y2 = np.meshgrid(xs, xs, xs, xs, indexing="ij")
        pts = np.stack([(X1 + 1j * Y1).ravel(), (X2 + 1j * Y2).ravel()], axis=1)
        pts = pts[domain.rho_at(pts) < 0]
        w = np.full(len(pts), (2 * R / n) ** 4)
    if domain.kind in ("disc", "ball", "ellipsoid"):
        vol = domain.volume()
        err = abs(float(np.sum(w)) - vol) / vol * 1.2 + 1e-15
    else:
        err = 2.0 / n     # boundary staircase heuristic
    return Quadrature(points=pts, weights=w, scheme="tensor",
                      resolution=resolution, est_rel_err=err)


def _mc_quadrature(domain: Domain, resolution: int, seed: int) -> Quadrature:
    n = 4 ** resolution if resolution < 12 else int(resolution)
    rng = make_rng(seed, "mc-quadrature", domain.kind, domain.axis_weights)
    R = domain.bounding_radius
    if domain.dim == 1:
        pts = rng.uniform(-R, R, n) + 1j * rng.uniform(-R, R, n)
        box = (2 * R) ** 2
    else:
        raw = rng.uniform(-R, R, (n, 4))
        pts = np.stack([raw[:, 0] + 1j * raw[:, 1], raw[:, 2] + 1j * raw[:, 3]],
                       axis=1)
        box = (2 * R) ** 4
    pts = pts[domain.rho_at(pts) < 0]
    w = np.full(len(pts), box / n)
    return Quadrature(points=pts, weights=w, scheme="monte-carlo",
                      resolution=n, est_rel_err=3.0 / math.sqrt(max(len(pts), 1)),
                      seed=seed)


# ---------------------------------------------------------------------------
# covers, lattices, Vitali selection
# ---------------------------------------------------------------------------

@dataclass
class Cover:
    centers: np.ndarray
    r: float
    R: float
    overlap: int       # max multiplicity of the inflated balls on the audit set
    covered: bool      # audit: every probe point lies in some Y(center, r)


def hyperbolic_lattice(domain: Domain, spacing: float, delta_min: float = 1e-3,
                       max_points: int = 200000) -> np.ndarray:
    """Deterministic lattice with invariant-metric spacing (disc: ring
    lattice; ball: greedy separation over a graded candidate cloud)."""
    if domain.kind == "disc":
        centers = [0j]
        j = 1
        while True:
            rho_j = j * spacing
            t = math.tanh(rho_j)
            if 1 - t < delta_min:
                break
            n_ang = max(6, int(math.ceil(math.pi * math.sinh(2 * rho_j) / spacing)))
            offs = 2.399963229728653 * j      # golden-angle ring offset
            th = offs + 2 * math.pi * np.arange(n_ang) / n_ang
            centers.extend(t * np.exp(1j * th))
            if len(centers) > max_points:
                raise BudgetError("lattice budget exhausted")
            j += 1
        return np.asarray(centers, dtype=complex)
    if domain.kind == "ball":
        cand = _ball_candidates(delta_min, max_points)
        kept: list = []
        arr = np.empty((0, 2), dtype=complex)
        for p in cand:
            if len(arr) == 0 or np.min(_ball_dist(arr, p)) > 0.7 * spacing:
                kept.append(p)
                arr = np.asarray(kept)
                if len(arr) > max_points:
                    raise BudgetError("lattice budget exhausted")
        return arr
    raise ValueError("lattice generation needs an exact-metric domain")


def _ball_candidates(delta_min: float, max_points: int) -> np.ndarray:
    """Graded candidate cloud in the ball whose per-shell Hopf grids match
    the anisotropic metric scales: the common phase (direction i z) needs
    step ~ delta, the latitude and phase difference ~ sqrt(delta)."""
    shells = []
    delta = 0.5
    while delta >= delta_min:
        shells.append(delta)
        delta *= 0.55
    if shells and shells[-1] > delta_min * 1.01:
        shells.append(delta_min)
    pts = [np.array([0j, 0j])]
    for d in shells:
        t = 1.0 - d
        n_a = max(4, int(math.ceil(4.5 / math.sqrt(d))))
        n_psi = max(6, int(math.ceil(12.6 / d)))
        n_phi = max(4, int(math.ceil(9.0 / math.sqrt(d))))
        a = (np.arange(n_a) + 0.5) * (math.pi / 2) / n_a
        psi = 2 * math.pi * np.arange(n_psi) / n_psi
        phi = math.pi * np.arange(n_phi) / n_phi
        A, PS, PH = np.meshgrid(a, psi, phi, indexing="ij")
        z1 = np.cos(A) * np.exp(1j * (PS + PH))
        z2 = np.sin(A) * np.exp(1j * (PS - PH))
        shell = t * np.stack([z1.ravel(), z2.ravel()], axis=1)
        pts.extend(list(shell))
        if len(pts) > 40 * max_points:
            raise BudgetError("ball candidate budget exhausted")
    return np.asarray(pts)


def cover_domain(domain: Domain, r: float, R: float,
                 quad: Quadrature | None = None, delta_min: float | None = None,
                 max_centers: int = 200000) -> Cover:
    """Cover the domain by balls Y(w_k, r) with bounded overlap of the
    inflated balls Y(w_k, R), audited on quadrature nodes.

    Nodes closer to the boundary than delta_min (default: half the minimal
    node boundary-distance, floored to keep the lattice within budget) are
    excluded from the audit set; the lattice reaches depth delta_min.
    """
    if R <= r:
        raise ValueError("need R > r")
    tau = math.atanh(r)
    if quad is None:
        if domain.dim == 1:
            quad = make_quadrature(domain, scheme="tensor", resolution=5)
        else:
            quad = make_quadrature(domain, scheme="monte-carlo", resolution=5,
                                   seed=17)
    node_delta = np.asarray(domain.delta(quad.points), dtype=float)
    if delta_min is None:
        # n = 2 covers grow like delta^-2; keep the default audit affordable
        floor = 2e-4 if domain.dim == 1 else 0.15
        delta_min = max(0.5 * float(np.min(node_delta)), floor)
    keep = node_delta >= delta_min
    probes = quad.points[keep]
    centers = hyperbolic_lattice(domain, tau / 1.5, delta_min=delta_min,
                                 max_points=max_centers)
    if domain.dim == 1:
        D = _disc_dist(probes[:, None], centers[None, :])
    else:
        D = np.stack([_ball_dist(centers, p) for p in probes])
    covered = bool(np.all(np.min(D, axis=1) < tau))
    overlap = int(np.max(np.sum(D < math.atanh(R), axis=1)))
    return Cover(centers=centers, r=r, R=R, overlap=overlap, covered=covered)


def vitali_select(domain: Domain, centers: np.ndarray, r: float,
                  R: float | None = None) -> np.ndarray:
    """Greedy disjoint subfamily: indices k with Y(b_k, r) pairwise disjoint.

    Scan order: decreasing boundary distance, ties by index.  Every discarded
    center is within 2 atanh(r) of a kept one, so the inflated balls
    Y(b_k, R) with atanh(R) >= 3 atanh(r) swallow the original union; R is
    accepted for interface symmetry and validated, the union audit lives
    with the caller.
    """
    if R is not None and math.atanh(R) < 3 * math.atanh(r) - 1e-12:
        raise ValueError("inflation too small: need atanh(R) >= 3 atanh(r)")
    centers = np.asarray(centers)
    deltas = np.asarray(domain.delta(centers), dtype=float)
    order = np.lexsort((np.arange(len(centers)), -deltas))
    kept: list[int] = []
    sep = 2 * math.atanh(r)
    kept_pts: list = []
    for idx in order:
        c = centers[idx]
        if kept_pts:
            ref = np.asarray(kept_pts)
            if domain.exact_metric:
                d = exact_distance(domain, ref, c)
            else:
                d = np.asarray([kobayashi_distance(domain, b, c).lo
                                for b in ref])
            if float(np.min(d)) < sep:
                continue
        kept.append(int(idx))
        kept_pts.append(c)
    return np.asarray(sorted(kept), dtype=int)
