"""Geometric functionals of sampled curves: chord-arc and bilipschitz
constants, the asymptotic-conformality defect, second differences, turning
angles, windowed bilipschitz constants, and the branch-consistent log ratio
of the two half-chords at a point (with its |log eps|-weighted score)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quadrature import adaptive_complex
from .errors import (
    BranchAmbiguityError,
    DegenerateGeometryError,
    DomainError,
    NumericalGateError,
)

__all__ = [
    "BranchLogValue",
    "DiagnosticsReport",
    "chord_arc_constant",
    "bilipschitz_constant",
    "conformality_modulus",
    "second_difference",
    "omega2",
    "turning_angle",
    "branch_log",
    "local_bilipschitz",
    "window_speed_range",
    "eps0_gate",
    "diagnostics",
    "diagnostics_csv_rows",
]


def _grid_arcs(points):
    """Cumulative inscribed-chord arc lengths along the grid."""
    chords = np.abs(np.roll(points, -1) - points)
    cum = np.concatenate(([0.0], np.cumsum(chords)))
    return cum, float(cum[-1])


def chord_arc_constant(sc) -> float:
    """Max over node pairs of shorter-arc length over chord length."""
    if sc.n < 64:
        raise DomainError("need at least 64 nodes for the pair scan")
    pts = sc.points
    n = sc.n
    cum, total = _grid_arcs(pts)
    cum2 = np.concatenate([cum[:-1], cum[:-1] + total])
    best = 1.0
    for off in range(1, n // 2 + 1):
        d = np.abs(np.roll(pts, -off) - pts)
        if np.any(d < 1e-12):
            raise DegenerateGeometryError(
                f"coincident points at parameter offset {off}")
        arc = cum2[off:off + n] - cum2[:n]
        shorter = np.minimum(arc, total - arc)
        best = max(best, float(np.max(shorter / d)))
    return best


def bilipschitz_constant(sc) -> float:
    """Smallest L for the two-sided chord bound of a unit-speed sampling.

    The upper constant of a unit-speed parametrization is 1, so L is the
    largest parameter-distance over chord ratio with separation <= T/2.
    """
    pts = sc.points
    n, h = sc.n, sc.spacing
    best = 1.0
    for off in range(1, n // 2 + 1):
        d = np.abs(np.roll(pts, -off) - pts)
        if np.any(d < 1e-12):
            raise DegenerateGeometryError(
                f"coincident points at parameter offset {off}")
        best = max(best, float(np.max(off * h / d)))
    return best


def conformality_modulus(sc, d: float, stride: int | None = None,
                         arc_factor: float = 16.0) -> float:
    """Worst detour defect sup (|z1-z| + |z2-z|)/|z1-z2| - 1 over chords <= d.

    The inner point z runs over grid nodes of the shorter-parameter arc
    (the smaller-diameter arc for chords below half the curve diameter;
    ties break toward the shorter-parameter arc).  The scan runs on a
    stride-subsampled grid tuned to the chord scale, and pairs of
    parameter separation beyond arc_factor * d are skipped: on a curve of
    chord-arc constant below arc_factor they cannot reach chords <= d.
    """
    if stride is None:
        stride = max(1, int(d / (48.0 * sc.spacing)))
    view = sc.points[::stride]
    n2 = len(view)
    h2 = sc.spacing * stride
    max_off = min(n2 // 2, int(math.ceil(arc_factor * d / h2)) + 1)
    worst = 0.0
    for off in range(2, max_off + 1):
        chord = np.abs(np.roll(view, -off) - view)
        sel = np.nonzero(chord <= d)[0]
        if sel.size == 0:
            continue
        za = view[sel]
        zb = view[(sel + off) % n2]
        c = chord[sel]
        best = np.zeros(sel.size)
        for k in range(1, off):
            zm = view[(sel + k) % n2]
            np.maximum(best, (np.abs(zm - za) + np.abs(zb - zm)) / c, out=best)
        worst = max(worst, float(best.max()) - 1.0)
    return worst


def second_difference(p, x, eps: float):
    """|gamma(x+eps) + gamma(x-eps) - 2 gamma(x)|, vectorized over x."""
    if not 0.0 < eps < p.period:
        raise DomainError("offset must lie in (0, period)")
    x = np.asarray(x, dtype=float)
    return np.abs(p.point(x + eps) + p.point(x - eps) - 2.0 * p.point(x))


def omega2(p, eps: float, x_grid):
    """Sup of the second difference over a parameter grid.

    Returns (value, argmax parameter).
    """
    x_grid = np.asarray(x_grid, dtype=float)
    vals = second_difference(p, x_grid, eps)
    k = int(np.argmax(vals))
    return float(vals[k]), float(x_grid[k])


def turning_angle(p, x, eps: float):
    """Unsigned angle in [0, pi] between the two chords leaving gamma(x)."""
    if not 0.0 < eps < p.period / 2.0:
        raise DomainError("offset must lie in (0, period/2)")
    x = np.asarray(x, dtype=float)
    a = p.point(x) - p.point(x - eps)
    b = p.point(x + eps) - p.point(x)
    if np.any(np.abs(a) < 1e-14) or np.any(np.abs(b) < 1e-14):
        raise DegenerateGeometryError("degenerate chord in turning angle")
    return np.abs(np.angle(b / a))


@dataclass(frozen=True)
class BranchLogValue:
    """Branch-consistent log ratio of the two half-chords at a point."""

    value: complex
    method: str
    condition_score: float


def _segment_min_distance(a: complex, d: complex) -> float:
    """Distance from the origin to the segment {a + t d : t in [0, 1]}."""
    dd = abs(d) ** 2
    if dd == 0.0:
        return abs(a)
    t = min(max(-((a * np.conj(d)).real) / dd, 0.0), 1.0)
    return abs(a + t * d)


def _branch_log_integral(a: complex, b: complex) -> complex:
    d = b - a
    zmin = _segment_min_distance(a, d)
    if zmin <= 1e-12:
        raise BranchAmbiguityError(
            f"chord segment passes within {zmin:.2e} of the origin; "
            "the log branch is ambiguous here")
    return complex(adaptive_complex(lambda t: d / (a + t * d), 0.0, 1.0, tol=1e-11))


def _branch_log_unwrapped(p, x: float, eps: float) -> complex:
    steps = 32
    while steps <= 16384:
        s = eps * np.arange(1, steps + 1) / steps
        z = p.point(np.array([x]))[0]
        u = p.point(x + s) - z
        v = p.point(x - s) - z
        if np.min(np.abs(u)) < 1e-14 or np.min(np.abs(v)) < 1e-14:
            raise DegenerateGeometryError("degenerate chord in argument unwrapping")
        du = np.angle(u[1:] / u[:-1])
        dv = np.angle(v[1:] / v[:-1])
        if max(np.max(np.abs(du), initial=0.0), np.max(np.abs(dv), initial=0.0)) < 1.0:
            base = float(np.angle(u[0] / (-v[0])))
            imag = base + float(du.sum()) - float(dv.sum())
            real = math.log(abs(u[-1])) - math.log(abs(v[-1]))
            return complex(real, imag)
        steps *= 2
    raise BranchAmbiguityError("argument unwrapping did not stabilize")


def branch_log(p, x: float, eps: float, method: str = "integral-formula") -> BranchLogValue:
    """log(gamma(x+eps)-gamma(x)) - log(gamma(x-eps)-gamma(x)) + pi*i with
    the branch fixed by continuity from eps -> 0.

    Computed by quadrature of the straight-segment integral between the two
    reflected half-chords (valid while that segment avoids the origin), or
    by continuous argument unwrapping along the curve; 'cross-check' runs
    both and requires agreement within 1e-8.
    """
    if not 0.0 < eps < p.period:
        raise DomainError("offset must lie in (0, period)")
    z = p.point(np.array([x]))[0]
    a = z - p.point(np.array([x - eps]))[0]
    b = p.point(np.array([x + eps]))[0] - z
    score_weight = abs(math.log(eps))
    if method == "integral-formula":
        val = _branch_log_integral(a, b)
    elif method == "unwrapped-argument":
        val = _branch_log_unwrapped(p, x, eps)
    elif method == "cross-check":
        val = _branch_log_integral(a, b)
        other = _branch_log_unwrapped(p, x, eps)
        if abs(val - other) > 1e-8:
            raise NumericalGateError(
                f"branch log methods disagree: {val} vs {other} at x={x}, eps={eps}")
    else:
        raise DomainError(f"unknown branch log method {method!r}")
    return BranchLogValue(value=val, method=method,
                          condition_score=abs(val) * score_weight)


def local_bilipschitz(p, x0: float, eps: float, m: int = 512) -> float:
    """Smallest window constant C with |x-y|/C <= |gamma(x)-gamma(y)| on
    [x0-eps, x0+eps], by pair scan on a window grid."""
    if not p.unit_speed:
        raise DomainError("window constant needs a unit-speed parametrization")
    if eps >= p.period / 4.0:
        raise DomainError("window must be smaller than a quarter period")
    m = max(m, 256)
    xs = np.linspace(x0 - eps, x0 + eps, m)
    pts = p.point(xs)
    step = xs[1] - xs[0]
    worst = 1.0
    for off in range(1, m):
        d = np.abs(pts[off:] - pts[:-off])
        if np.any(d < 1e-14):
            raise DegenerateGeometryError("coincident points in window scan")
        worst = max(worst, float(np.max(off * step / d)))
    return worst


def window_speed_range(p, x0: float, eps: float, m: int = 257):
    """Extremes (c, C) of chord speed |gamma(x)-gamma(y)|/|x-y| on a window.

    Odd node counts keep the window center and both endpoints on the grid,
    so the two exact half-chords at x0 are always among the scanned pairs.
    """
    m = max(m, 65)
    if m % 2 == 0:
        m += 1
    xs = np.linspace(x0 - eps, x0 + eps, m)
    pts = p.point(xs)
    step = xs[1] - xs[0]
    lo, hi = np.inf, 0.0
    for off in range(1, m):
        ratio = np.abs(pts[off:] - pts[:-off]) / (off * step)
        lo = min(lo, float(ratio.min()))
        hi = max(hi, float(ratio.max()))
    return lo, hi


def eps0_gate(sc, bilip: float, k_min: int = 2, k_max: int | None = None,
              threshold: float = 0.05):
    """Largest dyadic eps whose chord-scale conformality defect is small.

    Operational stand-in for the proof-level smallness threshold: the
    largest eps = period * 2^-k whose defect at chord scale bilip*eps stays
    below the threshold (default 0.05).  Returns None when no dyadic level
    passes, e.g. for corner curves.
    """
    period = sc.period
    if k_max is None:
        # keep at least 8 grid cells under the probed chord scale
        k_max = max(k_min, int(math.floor(math.log2(sc.n * bilip / 8.0))))
    pts_sub = sc.points[:: max(1, sc.n // 256)]
    diam = float(np.abs(pts_sub[:, None] - pts_sub[None, :]).max())
    for k in range(k_min, k_max + 1):
        eps = period * 2.0 ** (-k)
        d = bilip * eps
        if d > 0.45 * diam:
            continue
        if d < 8.0 * sc.spacing:
            break
        if conformality_modulus(sc, d) < threshold:
            return eps
    return None


@dataclass(frozen=True)
class DiagnosticsReport:
    """Geometry diagnostics of one sampled curve."""

    kind: str
    grid_n: int
    chord_arc_const: float
    bilip: float
    ac_table: tuple          # (k, eps, delta)
    omega2_table: tuple      # (k, eps, value, arg_param)
    omega2_focus_table: tuple
    local_bilip_table: tuple  # (k, eps, C_eps)
    eps0: float | None
    notes: tuple = ()


def focus_grid(p, eps: float, width: float = 48.0, count: int = 1536):
    """Refined parameter grid around the curve's focus point, when it has one."""
    x0 = p.meta.get("focus_param")
    if x0 is None:
        return None
    half = min(width * eps, 0.45 * p.period)
    return x0 + np.linspace(-half, half, count)


def diagnostics(p, sc, k_min: int = 3, k_max: int = 12,
                x_grid_n: int = 4096, eps0="measure") -> DiagnosticsReport:
    """Assemble the standard diagnostics tables on dyadic scales.

    eps0="measure" runs the smallness gate on this sampling; callers with a
    finer-grid measurement pass it in instead.
    """
    cac = chord_arc_constant(sc)
    bil = bilipschitz_constant(sc)
    period = sc.period
    xs = period * np.arange(x_grid_n) / x_grid_n
    ac_rows, w2_rows, w2f_rows, lb_rows = [], [], [], []
    for k in range(k_min, k_max + 1):
        eps = period * 2.0 ** (-k)
        if eps >= 2.0 * sc.spacing:
            ac_rows.append((k, eps, conformality_modulus(sc, bil * eps)))
        val, argx = omega2(p, eps, xs)
        w2_rows.append((k, eps, val, argx))
        fg = focus_grid(p, eps)
        if fg is not None:
            fval, fargx = omega2(p, eps, fg)
            w2f_rows.append((k, eps, fval, fargx))
        if eps < period / 4.0:
            x0 = p.meta.get("focus_param", 0.0)
            lb_rows.append((k, eps, local_bilipschitz(p, x0, eps, m=384)))
    gate = eps0_gate(sc, bil) if eps0 == "measure" else eps0
    return DiagnosticsReport(kind=p.kind, grid_n=sc.n, chord_arc_const=cac,
                             bilip=bil, ac_table=tuple(ac_rows),
                             omega2_table=tuple(w2_rows),
                             omega2_focus_table=tuple(w2f_rows),
                             local_bilip_table=tuple(lb_rows),
                             eps0=gate, notes=tuple(sc.warnings))


def diagnostics_csv_rows(report: DiagnosticsReport):
    """Rows quantity,epsilon,value,arg_param; dyadic eps written as T*2^-k."""
    rows = ["quantity,epsilon,value,arg_param"]
    rows.append(f"chord_arc_const,,{report.chord_arc_const:.17g},")
    rows.append(f"bilipschitz,,{report.bilip:.17g},")
    if report.eps0 is not None:
        rows.append(f"eps0,,{report.eps0:.17g},")
    for k, _eps, val in report.ac_table:
        rows.append(f"ac_modulus,T*2^-{k},{val:.17g},")
    for k, _eps, val, argx in report.omega2_table:
        rows.append(f"omega2,T*2^-{k},{val:.17g},{argx:.17g}")
    for k, _eps, val, argx in report.omega2_focus_table:
        rows.append(f"omega2_focus,T*2^-{k},{val:.17g},{argx:.17g}")
    for k, _eps, val in report.local_bilip_table:
        rows.append(f"local_bilip,T*2^-{k},{val:.17g},")
    return rows
