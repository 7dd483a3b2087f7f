"""Construction and sampling of closed chord-arc test curves.

Curve families: circles and ellipses (analytic), corner polygons (the
deliberate counterexample family, never smoothed), smooth graph closures,
and a recursive spiral assembled from smoothed triangular bumps whose
opening angles decay harmonically.  All builders emit unit-speed
parametrizations; non-analytic curves are backed by per-zone cumulative
arc-length splines with clamped end derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from ._quadrature import cumulative_gauss, gauss_panel
from .errors import ConstructionError, DegenerateGeometryError, DomainError

__all__ = [
    "PatchSpec",
    "Patch",
    "SpiralSpec",
    "Parametrization",
    "SampledCurve",
    "corner_profile",
    "mollified_profile",
    "mollified_slope",
    "build_patch",
    "patch_half_diameter",
    "build_spiral",
    "spiral_patch_polyline",
    "spiral_patch_param",
    "spiral_corner_params",
    "spiral_tail_series",
    "circle",
    "ellipse",
    "polygon",
    "unit_square",
    "graph_closure",
    "builtin_curve",
    "arclength_sample",
    "write_curve_csv",
]


# ---------------------------------------------------------------------------
# Smoothing kernel: the classical bump c*exp(-1/(1-u^2)) on (-1, 1),
# normalized to unit mass.  All profile evaluations reduce to its cdf and
# to ramp(w) = integral of (w-u)*eta(u) over u < w.

_GL96 = np.polynomial.legendre.leggauss(96)


def _bump_raw(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


BUMP_NORM = 1.0 / quad(lambda u: float(_bump_raw(u)), -1.0, 1.0,
                       epsabs=1e-14, epsrel=1e-14, limit=200)[0]


def bump(u):
    """Normalized smoothing kernel (even, positive, unit mass, support [-1,1])."""
    return BUMP_NORM * _bump_raw(u)


def _bump_panel(w, moment):
    """Vector GL panel of u^moment-weighted kernel integrals over [-1, w]."""
    w = np.asarray(w, dtype=float)
    wc = np.clip(w, -1.0, 1.0)
    nodes, weights = _GL96
    half = 0.5 * (wc + 1.0)
    mid = 0.5 * (wc - 1.0)
    u = mid[..., None] + half[..., None] * nodes
    vals = bump(u)
    if moment == "cdf":
        integrand = vals
    else:  # ramp: (w - u) * eta(u)
        integrand = (wc[..., None] - u) * vals
    return (integrand * weights).sum(axis=-1) * half


def bump_cdf(w):
    """Integral of the kernel over (-1, w]; equals 1 for w >= 1."""
    w = np.asarray(w, dtype=float)
    return np.where(w >= 1.0, 1.0, np.where(w <= -1.0, 0.0, _bump_panel(w, "cdf")))


def bump_ramp(w):
    """Smoothed positive-part ramp: integral of (w-u)+ against the kernel.

    Equals w for w >= 1 (unit mass, zero first moment) and 0 for w <= -1.
    """
    w = np.asarray(w, dtype=float)
    body = _bump_panel(w, "ramp")
    return np.where(w >= 1.0, w, np.where(w <= -1.0, 0.0, body))


def bump_abs_moment():
    """First absolute moment of the kernel; sets the smoothed peak height."""
    return float(2.0 * bump_ramp(0.0))


# ---------------------------------------------------------------------------
# Patch profiles.


@dataclass(frozen=True)
class PatchSpec:
    """One smoothed triangular bump: opening angle and smoothing width."""

    angle: float
    xi: float = 1.0 / 200.0

    def __post_init__(self):
        if not 0.0 < self.angle < math.pi / 2.0:
            raise DomainError(f"patch angle must be in (0, pi/2), got {self.angle}")
        if not 0.0 < self.xi < 0.01:
            raise DomainError(f"smoothing width xi must satisfy 0 < xi < 1/100, got {self.xi}")


def _check_unit_interval(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
        raise DomainError("profile parameter must lie in [0, 1]")
    return np.clip(t, 0.0, 1.0)


def corner_profile(spec: PatchSpec, t):
    """Triangular profile max{0, (1/4 - |t - 1/2|) tan(angle)} on [0, 1]."""
    t = _check_unit_interval(t)
    return np.maximum(0.0, (0.25 - np.abs(t - 0.5)) * math.tan(spec.angle))


def mollified_profile(spec: PatchSpec, t):
    """Corner profile convolved with the unit-mass kernel of width xi.

    Agrees with the unsmoothed profile exactly outside xi-neighborhoods of
    the three corner abscissas 1/4, 1/2, 3/4.
    """
    t = _check_unit_interval(t)
    tn, xi = math.tan(spec.angle), spec.xi
    out = np.empty_like(t)
    left = t < 0.375
    right = t > 0.625
    mid = ~(left | right)
    out[left] = tn * xi * bump_ramp((t[left] - 0.25) / xi)
    out[right] = tn * xi * bump_ramp((0.75 - t[right]) / xi)
    w = (t[mid] - 0.5) / xi
    out[mid] = tn * (0.25 - xi * (bump_ramp(w) + bump_ramp(-w)))
    return out


def mollified_slope(spec: PatchSpec, t):
    """Derivative of the smoothed profile (kernel cdf in the corner zones)."""
    t = _check_unit_interval(t)
    tn, xi = math.tan(spec.angle), spec.xi
    out = np.empty_like(t)
    left = t < 0.375
    right = t > 0.625
    mid = ~(left | right)
    out[left] = tn * bump_cdf((t[left] - 0.25) / xi)
    out[right] = -tn * bump_cdf((0.75 - t[right]) / xi)
    out[mid] = tn * (1.0 - 2.0 * bump_cdf((t[mid] - 0.5) / xi))
    return out


def _patch_boundaries(xi):
    return (0.0, 0.25 - xi, 0.25 + xi, 0.5 - xi, 0.5 + xi, 0.75 - xi, 0.75 + xi, 1.0)


@dataclass(frozen=True)
class Patch:
    """A built smoothed bump: profile callables, straight pieces, lengths."""

    spec: PatchSpec
    length: float
    corner_length: float
    segments: tuple  # four ((t, height), (t, height)) straight pieces
    peak: float

    @property
    def shortening(self) -> float:
        """Arc length lost to smoothing (nonnegative)."""
        return self.corner_length - self.length

    def height(self, t):
        return mollified_profile(self.spec, t)

    def slope(self, t):
        return mollified_slope(self.spec, t)

    def point(self, t):
        t = _check_unit_interval(t)
        return t + 1j * mollified_profile(self.spec, t)


def build_patch(spec: PatchSpec) -> Patch:
    """Build one smoothed bump and measure its arc length per smooth zone."""
    tn, xi = math.tan(spec.angle), spec.xi
    bounds = _patch_boundaries(xi)
    length = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        length += gauss_panel(
            lambda t: np.sqrt(1.0 + mollified_slope(spec, t) ** 2), a, b)
    corner_length = 0.5 + 0.5 / math.cos(spec.angle)
    segments = (
        ((0.0, 0.0), (0.25 - xi, 0.0)),
        ((0.25 + xi, xi * tn), (0.5 - xi, (0.25 - xi) * tn)),
        ((0.5 + xi, (0.25 - xi) * tn), (0.75 - xi, xi * tn)),
        ((0.75 + xi, 0.0), (1.0, 0.0)),
    )
    peak = float(mollified_profile(spec, 0.5))
    return Patch(spec=spec, length=float(length), corner_length=corner_length,
                 segments=segments, peak=peak)


def patch_half_diameter(n: int) -> float:
    """Half-diameter of the n-th rescaled bump: 2^(1-2n) / prod cos(1/j)."""
    if n < 1:
        raise DomainError("patch index must be >= 1")
    if n > 10 ** 6:
        raise DomainError("patch index too large; the scale would underflow far past float range")
    log_l = (1 - 2 * n) * math.log(2.0)
    for j in range(1, n):
        log_l -= math.log(math.cos(1.0 / j))
    if log_l < -745.0:
        return 0.0
    return math.exp(log_l)


@dataclass(frozen=True)
class SpiralSpec:
    """Recursion depth, smoothing width, and closure mode for the spiral."""

    depth: int
    xi: float = 1.0 / 200.0
    closure: str = "smooth-closure"

    def __post_init__(self):
        if self.depth < 1:
            raise DomainError("spiral depth must be >= 1")
        if not 0.0 < self.xi < 0.01:
            raise DomainError(f"smoothing width xi must satisfy 0 < xi < 1/100, got {self.xi}")
        if self.closure not in ("smooth-closure", "open"):
            raise DomainError(f"closure must be 'smooth-closure' or 'open', got {self.closure!r}")

    @property
    def angles(self) -> tuple:
        return tuple(1.0 / j for j in range(1, self.depth + 1))

    def angle_sum_exact(self) -> Fraction:
        return sum((Fraction(1, j) for j in range(1, self.depth + 1)), Fraction(0))


# ---------------------------------------------------------------------------
# Parametrizations and sampling.


@dataclass(frozen=True)
class Parametrization:
    """A periodic plane curve: parameter -> complex point, plus metadata."""

    period: float
    point: Callable
    derivative: Callable | None
    kind: str
    expected_bilip: float | None = None
    closed: bool = True
    unit_speed: bool = False
    meta: Mapping = field(default_factory=dict)

    def __call__(self, x):
        return self.point(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SampledCurve:
    """Uniform arc-length grid: points, chord tangents, arc-measure weights."""

    n: int
    period: float
    params: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    weights: np.ndarray
    source: Parametrization | None = None
    warnings: tuple = ()

    @property
    def spacing(self) -> float:
        return self.period / self.n

    @property
    def length(self) -> float:
        return float(self.weights.sum())


def arclength_sample(p: Parametrization, n: int) -> SampledCurve:
    """Sample a curve at n nodes uniform in arc length.

    Weights are chord-trapezoid cell lengths, normalized so that they total
    the measured curve length.  Tangents are central chord differences over
    2h.  Under-resolved fine structure (spiral scales below 8 grid cells)
    yields a warning-carrying result rather than an error.
    """
    if n < 16:
        raise DomainError("need at least 16 sample nodes")
    if not p.unit_speed:
        p = _as_unit_speed(p)
    period = p.period
    h = period / n
    params = h * np.arange(n)
    points = p.point(params)
    rolled_fwd = np.roll(points, -1)
    rolled_back = np.roll(points, 1)
    tangents = (rolled_fwd - rolled_back) / (2.0 * h)
    fwd = np.abs(rolled_fwd - points)
    back = np.abs(points - rolled_back)
    raw = 0.5 * (fwd + back)
    if np.any(raw <= 0.0):
        raise DegenerateGeometryError("coincident adjacent sample points")
    weights = raw * (period / raw.sum())
    warnings = ()
    finest = p.meta.get("finest_scale")
    if finest is not None and n * finest / period < 8.0:
        warnings = (
            f"under-resolved: n*finest_scale/length = {n * finest / period:.3g} < 8",
        )
    return SampledCurve(n=n, period=period, params=params, points=points,
                        tangents=tangents, weights=weights, source=p,
                        warnings=warnings)


def _as_unit_speed(p: Parametrization, samples: int = 16384) -> Parametrization:
    """Arc-length reparametrization of a generic parametrization."""
    knots = np.linspace(0.0, p.period, samples + 1)
    pts = p.point(knots)
    chords = np.abs(np.diff(pts))
    if np.any(chords <= 0.0):
        raise DegenerateGeometryError("parametrization has coincident consecutive samples")
    cum = np.concatenate(([0.0], np.cumsum(chords)))
    length = cum[-1]
    inv = CubicSpline(cum, knots)

    def point(s):
        s = np.mod(np.asarray(s, dtype=float), length)
        return p.point(inv(s))

    return Parametrization(period=float(length), point=point, derivative=None,
                           kind=p.kind, expected_bilip=p.expected_bilip,
                           closed=p.closed, unit_speed=True, meta=dict(p.meta))


def write_curve_csv(sc: SampledCurve, path):
    """Curve export: param,x,y,tx,ty,weight at 17 significant digits, LF."""
    lines = ["param,x,y,tx,ty,weight"]
    for k in range(sc.n):
        lines.append(
            f"{sc.params[k]:.17g},{sc.points[k].real:.17g},{sc.points[k].imag:.17g},"
            f"{sc.tangents[k].real:.17g},{sc.tangents[k].imag:.17g},{sc.weights[k]:.17g}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Analytic builders.


def circle(radius: float = 1.0) -> Parametrization:
    if radius <= 0.0:
        raise DomainError("circle radius must be positive")
    r = float(radius)

    def point(s):
        return r * np.exp(1j * np.asarray(s, dtype=float) / r)

    def derivative(s):
        return 1j * np.exp(1j * np.asarray(s, dtype=float) / r)

    return Parametrization(period=2.0 * math.pi * r, point=point,
                           derivative=derivative, kind="circle",
                           expected_bilip=math.pi / 2.0, unit_speed=True)


def ellipse(a: float, b: float) -> Parametrization:
    if a <= 0.0 or b <= 0.0:
        raise DomainError("ellipse semi-axes must be positive")

    def speed(theta):
        theta = np.asarray(theta, dtype=float)
        return np.sqrt((a * np.sin(theta)) ** 2 + (b * np.cos(theta)) ** 2)

    knots = np.linspace(0.0, 2.0 * math.pi, 8193)
    cum = cumulative_gauss(speed, knots)
    perimeter = float(cum[-1])
    inv = CubicSpline(cum, knots,
                      bc_type=((1, 1.0 / float(speed(0.0))),
                               (1, 1.0 / float(speed(2.0 * math.pi)))))

    def point(s):
        theta = inv(np.mod(np.asarray(s, dtype=float), perimeter))
        return a * np.cos(theta) + 1j * b * np.sin(theta)

    def derivative(s):
        theta = inv(np.mod(np.asarray(s, dtype=float), perimeter))
        return (-a * np.sin(theta) + 1j * b * np.cos(theta)) / speed(theta)

    return Parametrization(period=perimeter, point=point, derivative=derivative,
                           kind="ellipse", unit_speed=True,
                           meta={"axes": (float(a), float(b))})


def polygon(vertices: Sequence) -> Parametrization:
    """Closed polygon, unit speed, corners exact (never smoothed)."""
    verts = np.asarray([complex(v[0], v[1]) if isinstance(v, (tuple, list)) else complex(v)
                        for v in vertices])
    if len(verts) < 3:
        raise DomainError("polygon needs at least 3 vertices")
    edges = np.roll(verts, -1) - verts
    lengths = np.abs(edges)
    if np.any(lengths < 1e-12):
        raise DomainError("polygon has a zero-length edge")
    area2 = float(np.sum((verts * np.conj(np.roll(verts, -1))).imag))
    if abs(area2) < 1e-12:
        raise DomainError("polygon vertices are collinear (zero area)")
    if area2 > 0.0:  # shoelace with this ordering is clockwise; normalize to ccw
        verts = verts[::-1]
        edges = np.roll(verts, -1) - verts
        lengths = np.abs(edges)
    units = edges / lengths
    cum = np.concatenate(([0.0], np.cumsum(lengths)))
    perimeter = float(cum[-1])

    def point(s):
        m = np.mod(np.asarray(s, dtype=float), perimeter)
        e = np.clip(np.searchsorted(cum, m, side="right") - 1, 0, len(verts) - 1)
        return verts[e] + (m - cum[e]) * units[e]

    def derivative(s):
        m = np.mod(np.asarray(s, dtype=float), perimeter)
        e = np.clip(np.searchsorted(cum, m, side="right") - 1, 0, len(verts) - 1)
        return units[e]

    return Parametrization(period=perimeter, point=point, derivative=derivative,
                           kind="polygon", unit_speed=True,
                           meta={"corners": tuple(float(c) for c in cum[:-1]),
                                 "vertices": tuple(complex(v) for v in verts)})


def unit_square() -> Parametrization:
    return polygon([0.0, 1.0, 1.0 + 1.0j, 1.0j])


# ---------------------------------------------------------------------------
# Zone engine shared by the spiral and graph closures.  Each zone is a
# smooth stretch with its own exact or spline-backed inverse arc length.


class _LinearZone:
    """A straight stretch of a mapped graph: exact inverse arc length."""

    __slots__ = ("t0", "t1", "off", "mult", "lam_a", "lam_b", "speed", "length",
                 "s0", "patch_index")

    def __init__(self, t0, t1, off, mult, lam_a, lam_b, patch_index):
        self.t0, self.t1 = t0, t1
        self.off, self.mult = off, mult
        self.lam_a, self.lam_b = lam_a, lam_b
        self.speed = abs(mult) * math.sqrt(1.0 + lam_b * lam_b)
        self.length = (t1 - t0) * self.speed
        self.s0 = 0.0
        self.patch_index = patch_index

    def t_at(self, ds):
        return self.t0 + ds / self.speed

    def s_at(self, t):
        return (t - self.t0) * self.speed

    def point(self, ds):
        t = self.t_at(ds)
        lam = self.lam_a + self.lam_b * t
        return self.off + self.mult * (t + 1j * lam)

    def tangent(self, ds):
        d = self.mult * (1.0 + 1j * self.lam_b)
        d = d / abs(d)
        return np.full(np.shape(ds), d, dtype=complex)


class _CurvedZone:
    """A smooth curved stretch with a clamped-spline inverse arc length."""

    __slots__ = ("t0", "t1", "off", "mult", "lam", "slope", "length", "s0",
                 "_t_of_s", "_s_of_t", "patch_index")

    def __init__(self, t0, t1, off, mult, lam, slope, patch_index, knots=65):
        self.t0, self.t1 = t0, t1
        self.off, self.mult = off, mult
        self.lam, self.slope = lam, slope
        scale = abs(mult)

        def speed(t):
            return scale * np.sqrt(1.0 + np.asarray(slope(t)) ** 2)

        t_knots = np.linspace(t0, t1, knots)
        s_knots = cumulative_gauss(speed, t_knots)
        self.length = float(s_knots[-1])
        v0 = float(speed(np.array([t0]))[0])
        v1 = float(speed(np.array([t1]))[0])
        self._t_of_s = CubicSpline(s_knots, t_knots, bc_type=((1, 1.0 / v0), (1, 1.0 / v1)))
        self._s_of_t = CubicSpline(t_knots, s_knots, bc_type=((1, v0), (1, v1)))
        self.s0 = 0.0
        self.patch_index = patch_index

    def t_at(self, ds):
        return np.clip(self._t_of_s(ds), self.t0, self.t1)

    def s_at(self, t):
        return float(self._s_of_t(t))

    def point(self, ds):
        t = self.t_at(ds)
        return self.off + self.mult * (t + 1j * self.lam(t))

    def tangent(self, ds):
        t = self.t_at(ds)
        d = self.mult * (1.0 + 1j * self.slope(t))
        return d / np.abs(d)


class _ParametricZone:
    """A smooth parametric arc (the closure loop), spline inverse length."""

    __slots__ = ("u0", "u1", "curve", "dcurve", "length", "s0", "_u_of_s",
                 "patch_index")

    def __init__(self, curve, dcurve, u0, u1, knots=129):
        self.curve, self.dcurve = curve, dcurve
        self.u0, self.u1 = u0, u1

        def speed(u):
            return np.abs(dcurve(u))

        u_knots = np.linspace(u0, u1, knots)
        s_knots = cumulative_gauss(speed, u_knots)
        self.length = float(s_knots[-1])
        v0 = float(speed(np.array([u0]))[0])
        v1 = float(speed(np.array([u1]))[0])
        self._u_of_s = CubicSpline(s_knots, u_knots, bc_type=((1, 1.0 / v0), (1, 1.0 / v1)))
        self.s0 = 0.0
        self.patch_index = -1

    def point(self, ds):
        u = np.clip(self._u_of_s(ds), self.u0, self.u1)
        return self.curve(u)

    def tangent(self, ds):
        u = np.clip(self._u_of_s(ds), self.u0, self.u1)
        d = self.dcurve(u)
        return d / np.abs(d)


class _ZoneAssembly:
    """An ordered chain of zones traversed start to end (forward arc length)."""

    def __init__(self, zones):
        s = 0.0
        for z in zones:
            z.s0 = s
            s += z.length
        self.zones = zones
        self.total = s
        self._starts = np.array([z.s0 for z in zones])
        # junction continuity guard
        for za, zb in zip(zones[:-1], zones[1:]):
            ga = za.point(np.array([za.length]))[0]
            gb = zb.point(np.array([0.0]))[0]
            if abs(ga - gb) > 1e-9:
                raise ConstructionError(
                    f"zone junction mismatch |{ga} - {gb}| = {abs(ga - gb):.3e}")

    def point(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.total)
        idx = np.clip(np.searchsorted(self._starts, s, side="right") - 1, 0,
                      len(self.zones) - 1)
        out = np.empty(s.shape, dtype=complex)
        for k in np.unique(idx):
            mask = idx == k
            out[mask] = self.zones[k].point(s[mask] - self.zones[k].s0)
        return out

    def tangent(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.total)
        idx = np.clip(np.searchsorted(self._starts, s, side="right") - 1, 0,
                      len(self.zones) - 1)
        out = np.empty(s.shape, dtype=complex)
        for k in np.unique(idx):
            mask = idx == k
            out[mask] = self.zones[k].tangent(s[mask] - self.zones[k].s0)
        return out

    def param_of(self, patch_index, t):
        """Forward arc length of the point with local parameter t on a patch."""
        for z in self.zones:
            if z.patch_index == patch_index and z.t0 - 1e-12 <= t <= z.t1 + 1e-12:
                return z.s0 + z.s_at(min(max(t, z.t0), z.t1))
        raise DomainError(f"parameter {t} of patch {patch_index} is not on the curve")


def _patch_zone_functions(spec: PatchSpec):
    """Per-corner profile callables used by curved zones."""
    tn, xi = math.tan(spec.angle), spec.xi

    def lam1(t):
        return tn * xi * bump_ramp((np.asarray(t) - 0.25) / xi)

    def slope1(t):
        return tn * bump_cdf((np.asarray(t) - 0.25) / xi)

    def lam2(t):
        w = (np.asarray(t) - 0.5) / xi
        return tn * (0.25 - xi * (bump_ramp(w) + bump_ramp(-w)))

    def slope2(t):
        return tn * (1.0 - 2.0 * bump_cdf((np.asarray(t) - 0.5) / xi))

    def lam3(t):
        return tn * xi * bump_ramp((0.75 - np.asarray(t)) / xi)

    def slope3(t):
        return -tn * bump_cdf((0.75 - np.asarray(t)) / xi)

    return (lam1, slope1), (lam2, slope2), (lam3, slope3)


def _piece_zones(spec: PatchSpec, ta, tb, off, mult, patch_index):
    """Cut a kept stretch [ta, tb] of a patch graph into smooth zones."""
    tn, xi = math.tan(spec.angle), spec.xi
    corners = _patch_zone_functions(spec)
    bounds = _patch_boundaries(xi)
    cuts = [ta] + [b for b in bounds if ta < b < tb] + [tb]
    zones = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = 0.5 * (a + b)
        if m < 0.25 - xi or m > 0.75 + xi:
            zones.append(_LinearZone(a, b, off, mult, 0.0, 0.0, patch_index))
        elif abs(m - 0.25) <= xi:
            lam, slope = corners[0]
            zones.append(_CurvedZone(a, b, off, mult, lam, slope, patch_index))
        elif m < 0.5 - xi:
            zones.append(_LinearZone(a, b, off, mult, -0.25 * tn, tn, patch_index))
        elif abs(m - 0.5) <= xi:
            lam, slope = corners[1]
            zones.append(_CurvedZone(a, b, off, mult, lam, slope, patch_index))
        elif m < 0.75 - xi:
            zones.append(_LinearZone(a, b, off, mult, 0.75 * tn, -tn, patch_index))
        else:
            lam, slope = corners[2]
            zones.append(_CurvedZone(a, b, off, mult, lam, slope, patch_index))
    return zones


def _closure_loop(p_from, p_to, dir_from, dir_to, dip, reach=1.5):
    """C2 quintic Hermite arc from p_from to p_to with the given unit end
    directions, zero end curvature, pushed into the lower half plane."""
    rhs = np.array([p_from, reach * dir_from, 0.0, p_to, reach * dir_to, 0.0],
                   dtype=complex)
    mat = np.zeros((6, 6))
    for k in range(6):
        mat[0, k] = 1.0 if k == 0 else 0.0
        mat[1, k] = 1.0 if k == 1 else 0.0
        mat[2, k] = 2.0 if k == 2 else 0.0
        mat[3, k] = 1.0
        mat[4, k] = k
        mat[5, k] = k * (k - 1)
    coeffs = np.linalg.solve(mat, rhs)

    def base(u):
        u = np.asarray(u, dtype=float)
        return sum(coeffs[k] * u ** k for k in range(6))

    def dbase(u):
        u = np.asarray(u, dtype=float)
        return sum(k * coeffs[k] * u ** (k - 1) for k in range(1, 6))

    def curve(u):
        u = np.asarray(u, dtype=float)
        return base(u) - 1j * dip * 64.0 * u ** 3 * (1.0 - u) ** 3

    def dcurve(u):
        u = np.asarray(u, dtype=float)
        return dbase(u) - 1j * dip * 64.0 * (3.0 * u ** 2 * (1.0 - u) ** 3
                                             - 3.0 * u ** 3 * (1.0 - u) ** 2)

    return curve, dcurve


def _orients_ccw(point, period, n=4096):
    s = period * np.arange(n) / n
    z = point(s)
    area2 = float(np.sum((np.conj(z) * (np.roll(z, -1) - z)).imag))
    return area2 > 0.0


def _closed_from_assembly(assembly, kind, meta, focus_forward=None):
    """Wrap a forward assembly as a positively oriented unit-speed curve."""
    total = assembly.total
    if _orients_ccw(assembly.point, total):
        point, tangent = assembly.point, assembly.tangent
        if focus_forward is not None:
            meta = dict(meta, focus_param=float(focus_forward % total))
    else:
        def point(s):
            return assembly.point(np.mod(total - np.asarray(s, dtype=float), total))

        def tangent(s):
            return -assembly.tangent(np.mod(total - np.asarray(s, dtype=float), total))

        if focus_forward is not None:
            meta = dict(meta, focus_param=float((total - focus_forward) % total))
        meta = dict(meta, reversed=True)
    return Parametrization(period=total, point=point, derivative=tangent,
                           kind=kind, closed=True, unit_speed=True, meta=meta)


# ---------------------------------------------------------------------------
# The recursive spiral.


def _spiral_pieces(depth, xi):
    if depth == 1:
        return [(1, 0.0, 1.0)]
    pieces = [(1, 0.0, 0.25 + xi)]
    for j in range(2, depth):
        pieces.append((j, 4.0 * xi, 0.25 + xi))
    pieces.append((depth, 4.0 * xi, 1.0 - 4.0 * xi))
    for j in range(depth - 1, 1, -1):
        pieces.append((j, 0.5 - xi, 1.0 - 4.0 * xi))
    pieces.append((1, 0.5 - xi, 1.0))
    return pieces


def _spiral_maps(depth):
    """Affine map (offset, multiplier) of each patch in global coordinates."""
    offs, mults = [0.0 + 0.0j], [1.0 + 0.0j]
    for j in range(1, depth):
        alpha = 1.0 / j
        offs.append(offs[-1] + mults[-1] * 0.25)
        mults.append(mults[-1] * np.exp(1j * alpha) / (4.0 * math.cos(alpha)))
    return offs, mults


def _spiral_limit_point(depth_built):
    """Accumulation point of the untruncated recursion (converges fast)."""
    off, mult = 0.0 + 0.0j, 1.0 + 0.0j
    j = 1
    while abs(mult) > 1e-40 and j < depth_built + 400:
        off = off + mult * 0.25
        alpha = 1.0 / j
        mult = mult * np.exp(1j * alpha) / (4.0 * math.cos(alpha))
        j += 1
    return complex(off)


def _validate_spiral_separation(engine, patches, offs, mults, xi, depth):
    """Neighboring patches must stay 1e-9 apart away from their junctions."""
    for j in range(1, depth):
        spec_a, spec_b = patches[j - 1].spec, patches[j].spec
        scale = abs(mults[j - 1])
        # patch j kept stretches in its own local frame
        ta = np.linspace(4.0 * xi if j > 1 else 0.0, 0.25 + xi, 400)
        tb = np.linspace(0.5 - xi, 1.0 if j == 1 else 1.0 - 4.0 * xi, 400)
        t_parent = np.concatenate([ta, tb])
        za = t_parent + 1j * mollified_profile(spec_a, t_parent)
        # child graph mapped into the parent frame
        rel = (offs[j] - offs[j - 1]) / mults[j - 1], mults[j] / mults[j - 1]
        t_child = np.linspace(0.0, 1.0, 800)
        zb = rel[0] + rel[1] * (t_child + 1j * mollified_profile(spec_b, t_child))
        # junctions: parent t = 1/4+xi <-> child t = 4xi, parent 1/2-xi <-> child 1-4xi
        keep_a = (np.abs(t_parent - (0.25 + xi)) > 8.0 * xi) & \
                 (np.abs(t_parent - (0.5 - xi)) > 8.0 * xi)
        keep_b = (t_child > 24.0 * xi) & (t_child < 1.0 - 24.0 * xi)
        if not keep_a.any() or not keep_b.any():
            continue
        d = np.abs(za[keep_a][:, None] - zb[None, keep_b])
        if float(d.min()) * scale <= 1e-9:
            raise ConstructionError(
                f"rescaled patch {j + 1} approaches its parent within 1e-9 "
                f"(depth {j + 1}, separation {float(d.min()) * scale:.3e})")


def build_spiral(spec: SpiralSpec, validate: bool = True) -> Parametrization:
    """Assemble the truncated recursive spiral, optionally closed smoothly.

    Each gluing rotates by the patch opening angle and rescales so the next
    bump's endpoints match its parent's middle-segment chord; the deepest
    bump keeps its middle segment.  With smooth closure, a C2 arc in the
    lower half plane joins the endpoints and the result is oriented
    positively.
    """
    depth, xi = spec.depth, spec.xi
    patches = [build_patch(PatchSpec(1.0 / j, xi)) for j in range(1, depth + 1)]
    offs, mults = _spiral_maps(depth)
    zones = []
    for (j, ta, tb) in _spiral_pieces(depth, xi):
        zones.extend(_piece_zones(patches[j - 1].spec, ta, tb,
                                  offs[j - 1], mults[j - 1], j))
    open_assembly = _ZoneAssembly(zones)
    spiral_length = open_assembly.total

    if validate and depth > 1:
        _validate_spiral_separation(open_assembly, patches, offs, mults, xi, depth)

    focus_forward = open_assembly.param_of(depth, 0.5)
    meta = {
        "depth": depth,
        "xi": xi,
        "closure": spec.closure,
        "patch_offsets": tuple(complex(o) for o in offs),
        "patch_multipliers": tuple(complex(m) for m in mults),
        "limit_point": _spiral_limit_point(depth),
        "spiral_length": spiral_length,
        "finest_scale": patch_half_diameter(depth),
        "engine": open_assembly,
        "patches": tuple(patches),
    }

    if spec.closure == "open":
        meta["focus_param"] = float(focus_forward)
        return Parametrization(period=spiral_length, point=open_assembly.point,
                               derivative=open_assembly.tangent, kind="spiral",
                               closed=False, unit_speed=True, meta=meta)

    curve, dcurve = _closure_loop(1.0 + 0.0j, 0.0 + 0.0j, 1.0 + 0.0j, 1.0 + 0.0j,
                                  dip=0.75)
    closure_zones = [
        _ParametricZone(curve, dcurve, k / 8.0, (k + 1) / 8.0) for k in range(8)
    ]
    if validate:
        u = np.linspace(0.02, 0.98, 1024)
        zc = curve(u)
        sg = open_assembly.point(np.linspace(0.0, spiral_length, 2048))
        dmin = float(np.abs(zc[:, None] - sg[None, ::2]).min())
        if dmin <= 1e-9:
            raise ConstructionError(f"closure arc touches the spiral (min distance {dmin:.3e})")
        if np.max(zc.imag) >= -1e-12:
            raise ConstructionError("closure arc left the lower half plane")
    full = _ZoneAssembly(zones + closure_zones)
    meta["engine"] = full
    meta["closure_length"] = full.total - spiral_length
    return _closed_from_assembly(full, "spiral", meta, focus_forward=focus_forward)


def _spiral_engine(p: Parametrization):
    engine = p.meta.get("engine")
    if engine is None:
        raise DomainError("parametrization does not carry a spiral engine")
    return engine


def spiral_patch_polyline(p: Parametrization, j: int, n: int = 2048) -> np.ndarray:
    """Global-coordinate polyline of the j-th full bump graph (1-based)."""
    depth = p.meta["depth"]
    if not 1 <= j <= depth:
        raise DomainError(f"patch index {j} outside 1..{depth}")
    spec = p.meta["patches"][j - 1].spec
    t = np.linspace(0.0, 1.0, n)
    return (p.meta["patch_offsets"][j - 1]
            + p.meta["patch_multipliers"][j - 1] * (t + 1j * mollified_profile(spec, t)))


def spiral_patch_param(p: Parametrization, j: int, t: float) -> float:
    """Curve parameter of the kept point with local parameter t on patch j."""
    engine = _spiral_engine(p)
    s_forward = engine.param_of(j, t)
    if p.meta.get("reversed"):
        return float((p.period - s_forward) % p.period)
    return float(s_forward)


def spiral_corner_params(p: Parametrization) -> tuple:
    """Curve parameters of the kept smoothed-corner apexes, deepest first."""
    depth = p.meta["depth"]
    out = []
    for j in range(depth, 0, -1):
        for t in (0.25, 0.75, 0.5):
            if t == 0.5 and j != depth:
                continue  # the middle apex survives only on the deepest bump
            try:
                out.append(spiral_patch_param(p, j, t))
            except DomainError:
                continue
    return tuple(out)


def spiral_tail_series(p: Parametrization, k: int):
    """Per-level tail accounting of the spiral at scale index k.

    Returns (R_k, h_k): R_k is the arc-minus-chord excess across the k-th
    bump and everything glued deeper (telescoped per level, smoothing
    shortfalls measured from the built patches, truncated at the build
    depth); h_k is the measured width of the k-th rescaled bump's minimal
    bounding strip.
    """
    depth = p.meta["depth"]
    if not 1 <= k <= depth:
        raise DomainError(f"scale index {k} outside 1..{depth}")
    patches = p.meta["patches"]
    r = 0.0
    for j in range(k, depth + 1):
        lj = patch_half_diameter(j)
        alpha = 1.0 / j
        r += lj * (1.0 / math.cos(alpha) - 1.0) - 2.0 * lj * patches[j - 1].shortening
    poly = spiral_patch_polyline(p, k, n=4096)
    thetas = np.linspace(0.0, math.pi, 720, endpoint=False)
    proj = np.outer(np.exp(-1j * thetas), poly).real
    widths = proj.max(axis=1) - proj.min(axis=1)
    return float(r), float(widths.min())


# ---------------------------------------------------------------------------
# Smooth graph closures (sine-series bumps over [0, 1], closed from below).


def graph_closure(coeffs: Sequence[float]) -> Parametrization:
    coeffs = [float(c) for c in coeffs]
    if not coeffs or all(c == 0.0 for c in coeffs):
        raise DomainError("graph closure needs at least one nonzero sine coefficient")

    def g(t):
        t = np.asarray(t, dtype=float)
        return sum(c * np.sin((k + 1) * math.pi * t) for k, c in enumerate(coeffs))

    def dg(t):
        t = np.asarray(t, dtype=float)
        return sum(c * (k + 1) * math.pi * np.cos((k + 1) * math.pi * t)
                   for k, c in enumerate(coeffs))

    zones = [
        _CurvedZone(k / 16.0, (k + 1) / 16.0, 0.0 + 0.0j, 1.0 + 0.0j, g, dg, 1)
        for k in range(16)
    ]
    grid = np.linspace(0.0, 1.0, 1024)
    gmin = float(np.min(g(grid)))
    dip = 0.75 + max(0.0, -gmin) + 0.25 * float(np.max(np.abs(g(grid))))
    d0 = 1.0 + 1j * float(dg(np.array([1.0]))[0])
    d1 = 1.0 + 1j * float(dg(np.array([0.0]))[0])
    curve, dcurve = _closure_loop(1.0 + 0.0j, 0.0 + 0.0j, d0 / abs(d0), d1 / abs(d1),
                                  dip=dip)
    closure_zones = [
        _ParametricZone(curve, dcurve, k / 8.0, (k + 1) / 8.0) for k in range(8)
    ]
    assembly = _ZoneAssembly(zones + closure_zones)
    u = np.linspace(0.02, 0.98, 512)
    zg = grid + 1j * np.asarray(g(grid))
    dmin = float(np.abs(curve(u)[:, None] - zg[None, ::4]).min())
    if dmin <= 1e-9:
        raise ConstructionError(f"closure arc touches the graph (min distance {dmin:.3e})")
    return _closed_from_assembly(assembly, "graph-closure", {"coeffs": tuple(coeffs)})


def builtin_curve(kind: str, params: Sequence[float]) -> Parametrization:
    """Parameter-list front end used by the spec-file loader."""
    params = [float(v) for v in params]
    if kind == "circle":
        if len(params) != 1:
            raise DomainError("circle takes a single positive radius")
        return circle(params[0])
    if kind == "ellipse":
        if len(params) != 2:
            raise DomainError("ellipse takes two positive semi-axes")
        return ellipse(params[0], params[1])
    if kind == "polygon":
        if len(params) < 6 or len(params) % 2 != 0:
            raise DomainError("polygon takes an even list of >= 6 coordinates")
        verts = [complex(params[2 * i], params[2 * i + 1]) for i in range(len(params) // 2)]
        return polygon(verts)
    if kind == "graph-closure":
        return graph_closure(params)
    raise DomainError(f"unknown builtin curve kind {kind!r}")
