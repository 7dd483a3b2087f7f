"""Tests for curve construction, patch profiles, and arc-length sampling."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from cauchylab import curves
from cauchylab.errors import ConstructionError, DomainError


# -- smoothing kernel and profiles ------------------------------------------

# First absolute moment of the kernel, frozen from an independent adaptive
# quadrature of |u| c exp(-1/(1-u^2)) (abs tol < 1e-12).
ABS_MOMENT = 0.334453997709974


def test_kernel_normalization():
    mass, _ = quad(lambda u: float(curves.bump(np.array([u]))[0]), -1, 1,
                   epsabs=1e-13, limit=200)
    assert abs(mass - 1.0) < 1e-11


def test_kernel_abs_moment_frozen():
    assert abs(curves.bump_abs_moment() - ABS_MOMENT) < 1e-12


def test_corner_profile_values():
    spec = curves.PatchSpec(math.pi / 4)
    assert curves.corner_profile(spec, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert curves.corner_profile(spec, 0.1) == 0.0
    assert curves.corner_profile(spec, 3 / 8) == pytest.approx(0.125, abs=1e-15)


def test_corner_profile_domain_error():
    spec = curves.PatchSpec(math.pi / 4)
    with pytest.raises(DomainError):
        curves.corner_profile(spec, 1.2)
    with pytest.raises(DomainError):
        curves.mollified_profile(spec, -0.1)


def test_mollified_profile_matches_brute_force_convolution():
    spec = curves.PatchSpec(math.pi / 4, 1 / 200)

    def brute(t):
        val, _ = quad(
            lambda u: float(curves.corner_profile(spec, np.clip(t - spec.xi * u, 0, 1))
                            * curves.bump(np.array([u]))[0]),
            -1, 1, epsabs=1e-12, limit=200)
        return val

    for t in [0.1, 0.2475, 0.25, 0.2525, 0.375, 0.499, 0.5, 0.62, 0.748, 0.752, 0.9]:
        assert curves.mollified_profile(spec, t) == pytest.approx(brute(t), abs=1e-10)


def test_mollified_profile_examples():
    spec = curves.PatchSpec(math.pi / 4, 1 / 200)
    assert curves.mollified_profile(spec, 0.1) == 0.0
    assert curves.mollified_profile(spec, 3 / 8) == pytest.approx(0.125, abs=1e-12)
    peak = 0.25 - spec.xi * math.tan(math.pi / 4) * ABS_MOMENT
    assert curves.mollified_profile(spec, 0.5) == pytest.approx(peak, abs=1e-10)


def test_mollified_profile_exact_outside_corner_neighborhoods():
    spec = curves.PatchSpec(0.5, 1 / 300)
    ts = np.concatenate([
        np.linspace(0.0, 0.25 - spec.xi, 40, endpoint=False),
        np.linspace(0.25 + spec.xi, 0.5 - spec.xi, 40),
        np.linspace(0.5 + spec.xi, 0.75 - spec.xi, 40),
        np.linspace(0.75 + spec.xi, 1.0, 40),
    ])
    assert np.max(np.abs(curves.mollified_profile(spec, ts)
                         - curves.corner_profile(spec, ts))) < 1e-12


def test_patch_spec_validation():
    with pytest.raises(DomainError):
        curves.PatchSpec(0.0)
    with pytest.raises(DomainError):
        curves.PatchSpec(math.pi / 2)
    with pytest.raises(DomainError):
        curves.PatchSpec(0.5, xi=0.02)


# -- built patches -----------------------------------------------------------

def test_patch_straight_pieces_exact():
    spec = curves.PatchSpec(0.5, 1 / 200)
    patch = curves.build_patch(spec)
    for (t0, y0), (t1, y1) in patch.segments:
        assert curves.mollified_profile(spec, t0) == pytest.approx(y0, abs=1e-12)
        assert curves.mollified_profile(spec, t1) == pytest.approx(y1, abs=1e-12)
        tm = 0.5 * (t0 + t1)
        ym = 0.5 * (y0 + y1)
        assert curves.mollified_profile(spec, tm) == pytest.approx(ym, abs=1e-12)


def test_patch_endpoints_and_midpoint():
    patch = curves.build_patch(curves.PatchSpec(math.pi / 4))
    assert patch.point(0.0) == pytest.approx(0.0, abs=1e-14)
    assert patch.point(1.0) == pytest.approx(1.0, abs=1e-14)
    assert patch.peak < 0.25 * math.tan(math.pi / 4)


def test_patch_convexity_pattern():
    spec = curves.PatchSpec(0.5, 1 / 200)
    xi = spec.xi
    for (a, b, sign) in [(0.25 - xi, 0.25 + xi, 1.0),
                         (0.5 - xi, 0.5 + xi, -1.0),
                         (0.75 - xi, 0.75 + xi, 1.0)]:
        t = np.linspace(a, b, 400)
        lam = curves.mollified_profile(spec, t)
        second = lam[2:] - 2 * lam[1:-1] + lam[:-2]
        assert np.all(sign * second > -1e-15)


def test_patch_shortening_bounds():
    for angle in [0.5, 0.25, 0.125, 0.0625]:
        patch = curves.build_patch(curves.PatchSpec(angle))
        assert 0.0 <= patch.shortening <= 2.0 * math.tan(angle)


def test_patch_arclength_against_quadrature():
    spec = curves.PatchSpec(0.5, 1 / 200)
    patch = curves.build_patch(spec)
    ref, _ = quad(lambda t: math.sqrt(1.0 + float(curves.mollified_slope(spec, t)) ** 2),
                  0.0, 1.0, epsabs=1e-11, limit=400,
                  points=list(curves._patch_boundaries(spec.xi)))
    assert patch.length == pytest.approx(ref, abs=1e-9)


# -- scale sequence ----------------------------------------------------------

def test_half_diameter_base_case():
    assert curves.patch_half_diameter(1) == 0.5


def test_half_diameter_second_value():
    assert curves.patch_half_diameter(2) == pytest.approx(0.125 / math.cos(1.0), rel=1e-14)


def test_half_diameter_dyadic_bound():
    for m in range(1, 14):
        assert curves.patch_half_diameter(m) <= 2.0 ** (-m)


def test_half_diameter_guard():
    with pytest.raises(DomainError):
        curves.patch_half_diameter(10 ** 6 + 1)


# -- builtin curves ----------------------------------------------------------

def test_circle_parametrization():
    c = curves.circle(1.0)
    assert c.period == pytest.approx(2 * math.pi)
    x = np.linspace(0, 2 * math.pi, 17)
    assert np.max(np.abs(c.point(x) - np.exp(1j * x))) < 1e-15


def test_unit_square_corners():
    sq = curves.unit_square()
    assert sq.period == pytest.approx(4.0)
    corners = sq.meta["corners"]
    assert corners == (0.0, 1.0, 2.0, 3.0)
    pts = sq.point(np.array(corners))
    verts = np.array(sq.meta["vertices"])
    assert np.max(np.abs(pts - verts)) < 1e-14


def test_polygon_orientation_normalized():
    ccw = curves.polygon([0.0, 1.0, 1.0 + 1.0j, 1.0j])
    cw = curves.polygon([0.0, 1.0j, 1.0 + 1.0j, 1.0])
    s = np.linspace(0, 4.0, 64, endpoint=False)
    za, zb = ccw.point(s), cw.point(s)
    area = lambda z: float(np.sum((np.conj(z) * (np.roll(z, -1) - z)).imag))
    assert area(za) > 0 and area(zb) > 0


def test_polygon_validation():
    with pytest.raises(DomainError):
        curves.polygon([0.0, 1.0])
    with pytest.raises(DomainError):
        curves.polygon([0.0, 1.0, 2.0])  # collinear
    with pytest.raises(DomainError):
        curves.polygon([0.0, 0.0, 1.0])  # zero edge


def test_ellipse_unit_speed_and_perimeter():
    e = curves.ellipse(2.0, 1.0)
    ref, _ = quad(lambda t: math.sqrt(4 * math.sin(t) ** 2 + math.cos(t) ** 2),
                  0, 2 * math.pi, epsabs=1e-12, limit=200)
    assert e.period == pytest.approx(ref, abs=1e-10)
    s = np.linspace(0, e.period, 500, endpoint=False)
    d = 1e-6
    speeds = np.abs(e.point(s + d) - e.point(s)) / d
    assert np.max(np.abs(speeds - 1.0)) < 1e-8


def test_builtin_curve_dispatch_and_validation():
    assert curves.builtin_curve("circle", [2.0]).kind == "circle"
    assert curves.builtin_curve("ellipse", [2.0, 1.0]).kind == "ellipse"
    assert curves.builtin_curve("polygon", [0, 0, 1, 0, 1, 1, 0, 1]).kind == "polygon"
    assert curves.builtin_curve("graph-closure", [0.3]).kind == "graph-closure"
    with pytest.raises(DomainError):
        curves.builtin_curve("circle", [-1.0])
    with pytest.raises(DomainError):
        curves.builtin_curve("torus", [1.0])


# -- periodicity / injectivity invariants ------------------------------------

BUILDERS = {
    "circle": lambda: curves.circle(1.0),
    "ellipse": lambda: curves.ellipse(2.0, 1.0),
    "square": curves.unit_square,
    "graph": lambda: curves.graph_closure([0.3, 0.05]),
    "spiral": lambda: curves.build_spiral(curves.SpiralSpec(depth=6)),
}


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_periodicity(name):
    p = BUILDERS[name]()
    x = np.linspace(0.0, p.period, 257)
    tol = 1e-12 if name in ("circle", "square") else 1e-9
    assert np.max(np.abs(p.point(x + p.period) - p.point(x))) < tol


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_injectivity_at_4096(name):
    p = BUILDERS[name]()
    sc = curves.arclength_sample(p, 4096)
    pts = sc.points
    closest = np.inf
    for off in range(2, 2048):
        d = np.abs(np.roll(pts, -off) - pts)
        closest = min(closest, float(d.min()))
    assert closest > 1e-9


# -- sampling ----------------------------------------------------------------

def test_circle_sample_weights_uniform():
    sc = curves.arclength_sample(curves.circle(1.0), 4096)
    assert np.max(np.abs(sc.weights - 2 * math.pi / 4096)) < 1e-10


def test_square_sample_total_weight():
    sc = curves.arclength_sample(curves.unit_square(), 4096)
    assert abs(sc.length - 4.0) < 1e-9


def test_sample_weights_positive_and_tangent_shape():
    sc = curves.arclength_sample(curves.ellipse(2.0, 1.0), 512)
    assert np.all(sc.weights > 0)
    assert np.max(np.abs(np.abs(sc.tangents) - 1.0)) < 1e-3


def test_sample_grid_doubling_cauchy():
    p = curves.ellipse(2.0, 1.0)
    l1 = curves.arclength_sample(p, 1024).length
    l2 = curves.arclength_sample(p, 2048).length
    assert abs(l1 - l2) / l2 < 1e-6


def test_spiral_sample_grid_doubling():
    p = curves.build_spiral(curves.SpiralSpec(depth=8))
    l1 = curves.arclength_sample(p, 2 ** 16).length
    l2 = curves.arclength_sample(p, 2 ** 17).length
    assert abs(l1 - l2) / l2 < 1e-4


def test_sample_under_resolution_warning():
    p = curves.build_spiral(curves.SpiralSpec(depth=8))
    sc = curves.arclength_sample(p, 1024)
    assert sc.warnings and "under-resolved" in sc.warnings[0]
    shallow = curves.build_spiral(curves.SpiralSpec(depth=5))
    fine = curves.arclength_sample(shallow, 2 ** 13)
    assert not fine.warnings


def test_sample_rejects_tiny_grid():
    with pytest.raises(DomainError):
        curves.arclength_sample(curves.circle(1.0), 8)


def test_generic_reparametrization_path():
    base = curves.circle(1.0)

    def warped(x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * (x + 0.3 * np.sin(x)))

    p = curves.Parametrization(period=2 * math.pi, point=warped, derivative=None,
                               kind="circle", unit_speed=False)
    sc = curves.arclength_sample(p, 2048)
    assert abs(sc.length - 2 * math.pi) < 1e-5
    assert np.max(np.abs(np.abs(sc.points) - 1.0)) < 1e-9
    ref = curves.arclength_sample(base, 2048)
    assert abs(sc.length - ref.length) < 1e-5


def test_curve_csv_export(tmp_path):
    sc = curves.arclength_sample(curves.circle(1.0), 16)
    path = tmp_path / "curve.csv"
    curves.write_curve_csv(sc, path)
    text = path.read_bytes().decode()
    lines = text.split("\n")
    assert lines[0] == "param,x,y,tx,ty,weight"
    assert len(lines) == 18 and lines[-1] == ""
    assert "\r" not in text
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == pytest.approx(1.0, abs=1e-15)


# -- spiral ------------------------------------------------------------------

def test_spiral_spec_validation():
    with pytest.raises(DomainError):
        curves.SpiralSpec(depth=0)
    with pytest.raises(DomainError):
        curves.SpiralSpec(depth=4, xi=0.02)
    with pytest.raises(DomainError):
        curves.SpiralSpec(depth=4, closure="loop")


def test_spiral_angle_sum_is_harmonic_number():
    spec = curves.SpiralSpec(depth=4)
    assert spec.angle_sum_exact() == Fraction(25, 12)
    spec12 = curves.SpiralSpec(depth=12)
    assert spec12.angle_sum_exact() == sum(Fraction(1, j) for j in range(1, 13))


def test_spiral_depth_one_single_patch():
    p = curves.build_spiral(curves.SpiralSpec(depth=1))
    assert p.meta["depth"] == 1
    # no gluing: sole patch carries zero rotation
    assert p.meta["patch_multipliers"] == (1 + 0j,)
    assert p.closed


def test_spiral_gluing_rotations_are_harmonic():
    p = curves.build_spiral(curves.SpiralSpec(depth=8))
    mults = p.meta["patch_multipliers"]
    for n in range(1, 9):
        expected = sum(1.0 / j for j in range(1, n))
        assert np.angle(mults[n - 1]) == pytest.approx(expected, abs=1e-12)


def test_spiral_subpatch_diameters_match_scale():
    p = curves.build_spiral(curves.SpiralSpec(depth=8))
    for n in range(1, 9):
        poly = curves.spiral_patch_polyline(p, n, 2048)
        ends = abs(poly[-1] - poly[0])
        sub = np.concatenate([poly[::8], poly[-1:]])
        diam = float(np.abs(sub[:, None] - sub[None, :]).max())
        diam = max(diam, float(ends))
        assert diam == pytest.approx(2.0 * curves.patch_half_diameter(n), rel=1e-3)


def test_spiral_tail_series_matches_measured_arc_excess():
    p = curves.build_spiral(curves.SpiralSpec(depth=8))
    for k in [3, 5, 7]:
        x1 = curves.spiral_patch_param(p, k, 0.10)
        x2 = curves.spiral_patch_param(p, k, 0.90)
        sep = abs(x2 - x1)
        sep = min(sep, p.period - sep)
        chord = abs(p.point(np.array([x2]))[0] - p.point(np.array([x1]))[0])
        r_formula, _ = curves.spiral_tail_series(p, k)
        assert r_formula == pytest.approx(sep - chord, abs=1e-12)


def test_spiral_tail_ratios_shrink():
    p = curves.build_spiral(curves.SpiralSpec(depth=12))
    ratios_r, ratios_h = [], []
    for k in range(6, 12):
        r, h = curves.spiral_tail_series(p, k)
        l = curves.patch_half_diameter(k)
        ratios_r.append(r / l)
        ratios_h.append(h / l)
    assert all(x < 0.1 for x in ratios_r)
    assert all(np.diff(ratios_r) < 0)
    assert all(np.diff(ratios_h) < 0)


def test_spiral_geometric_series_bound():
    # truncated tail sum obeys the closed-form geometric bound per level
    for depth, k in [(12, 6), (12, 9)]:
        lk = curves.patch_half_diameter(k)
        tail = sum(curves.patch_half_diameter(j) for j in range(k + 1, depth + 1))
        alpha = 1.0 / k
        bound = 12.0 * math.cos(alpha) / (4.0 * math.cos(alpha) - 1.0) - 3.0
        assert 3.0 * tail / lk <= bound + 1e-12


def test_spiral_closure_stays_low_and_closes():
    p = curves.build_spiral(curves.SpiralSpec(depth=4))
    assert p.closed
    x = np.linspace(0, p.period, 4097)
    z = p.point(x)
    assert abs(z[0] - z[-1]) < 1e-9
    # positively oriented
    area2 = float(np.sum((np.conj(z[:-1]) * (z[1:] - z[:-1])).imag))
    assert area2 > 0


def test_spiral_open_variant():
    p = curves.build_spiral(curves.SpiralSpec(depth=3, closure="open"))
    assert not p.closed
    z0 = p.point(np.array([0.0]))[0]
    z1 = p.point(np.array([p.period - 1e-12]))[0]
    assert abs(z0 - 0.0) < 1e-9
    assert abs(z1 - 1.0) < 1e-6


def test_spiral_limit_point_and_focus():
    p = curves.build_spiral(curves.SpiralSpec(depth=10))
    z0 = p.meta["limit_point"]
    x0 = p.meta["focus_param"]
    znear = p.point(np.array([x0]))[0]
    assert abs(znear - z0) < 4.0 * curves.patch_half_diameter(10)


def test_spiral_deep_separation_guard_trips_when_too_deep():
    # depth 16 folds fall under the 1e-9 separation tolerance
    with pytest.raises(ConstructionError):
        curves.build_spiral(curves.SpiralSpec(depth=16))


def test_patch_angle_arc_chord_bound():
    # points on one smoothed bump: arc <= chord / cos(angle)
    for angle in (0.5, 0.25):
        spec = curves.PatchSpec(angle)
        t = np.linspace(0.0, 1.0, 1200)
        pts = t + 1j * curves.mollified_profile(spec, t)
        seg = np.abs(np.diff(pts))
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        worst = 0.0
        for off in range(1, 1199, 7):
            arc = cum[off:] - cum[:-off]
            chord = np.abs(pts[off:] - pts[:-off])
            worst = max(worst, float(np.max(arc / chord)))
        assert worst <= 1.0 / math.cos(angle) + 1e-9


def test_spiral_deep_pairs_meet_chain_bound():
    # pairs inside the union of bumps at depth >= k: the measured arc-chord
    # sup stays under 1/cos(a_k) + 4 h_{k+1}/(cos(a_k) L_{k+1}) + 4 R_{k+1}/L_{k+1}
    p = curves.build_spiral(curves.SpiralSpec(depth=12))
    xi = p.meta["xi"]
    for k in (5, 7):
        lo = curves.spiral_patch_param(p, k, 0.25 + xi)
        hi = curves.spiral_patch_param(p, k, 0.5 - xi)
        lo, hi = min(lo, hi), max(lo, hi)
        xs = np.linspace(lo, hi, 500)
        pts = p.point(xs)
        worst = 0.0
        for off in range(1, 499):
            arc = xs[off:] - xs[:-off]
            chord = np.abs(pts[off:] - pts[:-off])
            worst = max(worst, float(np.max(arc / chord)))
        r_next, h_next = curves.spiral_tail_series(p, k + 1)
        l_next = curves.patch_half_diameter(k + 1)
        alpha = 1.0 / k
        bound = (1.0 / math.cos(alpha)
                 + 4.0 * h_next / (math.cos(alpha) * l_next)
                 + 4.0 * r_next / l_next)
        assert worst <= bound


def test_spiral_window_constant_trend():
    # (1 - 1/C_eps) |log eps|^2 stays in a narrow band near the focus
    p = curves.build_spiral(curves.SpiralSpec(depth=12))
    from cauchylab import geometry
    x0 = p.meta["focus_param"]
    scores = []
    for k in range(6, 15):
        eps = p.period * 2.0 ** (-k)
        c_eps = geometry.local_bilipschitz(p, x0, eps, m=512)
        scores.append((1.0 - 1.0 / c_eps) * math.log(eps) ** 2)
    assert max(scores) / min(scores) <= 3.0
