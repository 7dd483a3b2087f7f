"""Verification scans tying the pieces together: the three-term
decomposition identity of the truncated transform, far-field decay of the
kernel transform, the |log eps|-weighted boundedness criterion with its
adversarial indicator family, the two-sided second-difference comparison,
and the maximal-ratio trend scan whose verdict the criterion verdict must
match."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .curves import SampledCurve, arclength_sample
from .errors import BranchAmbiguityError, DomainError, ResolutionError
from .operators import (
    GridFunction,
    TruncationSpec,
    hl_maximal_all,
    hl_maximal_squared,
    kernel_transform_direct_fill,
    kernel_truncation_transform,
    maximal_cauchy_all,
    pv_cauchy_all,
    truncated_cauchy,
)

__all__ = [
    "HarnessConfig",
    "TestFunction",
    "DecompositionReport",
    "FarFieldDecayReport",
    "CriterionTable",
    "SandwichReport",
    "CotlarReport",
    "adversarial_indicator",
    "deepest_exponent",
    "anchor_params",
    "make_test_functions",
    "default_scan_params",
    "decomposition_check",
    "far_field_decay_check",
    "large_truncation_check",
    "criterion_scan",
    "sandwich_check",
    "cotlar_ratio_scan",
    "classify_score_profile",
    "classify_ratio_trend",
    "verdicts_agree",
]

JUMP_GUARD_CELLS = 4.0
UNDERFLOW_FLOOR = 1e-14


@dataclass(frozen=True)
class HarnessConfig:
    """Measured curve constants plus the truncation grid for one scan run."""

    bilip: float
    dilation: float
    eps0: float | None
    trunc: TruncationSpec
    seed: int = 0

    def __post_init__(self):
        needed = max(2.0 * self.bilip ** 2, self.bilip * (self.bilip + 1.0))
        if self.dilation < needed - 1e-9:
            raise DomainError(
                f"window dilation {self.dilation} below the required "
                f"max(2L^2, L(L+1)) = {needed:.6g} for L = {self.bilip:.6g}")

    @staticmethod
    def for_curve(sc: SampledCurve, k_min: int = 2, k_max: int = 24,
                  bilip: float | None = None, dilation: float | None = None,
                  eps0: float | None = None, measure_eps0: bool = False,
                  seed: int = 0) -> "HarnessConfig":
        if bilip is None:
            scl = sc if sc.n <= 2048 else arclength_sample(sc.source, 2048)
            bilip = geometry.bilipschitz_constant(scl)
        if dilation is None:
            dilation = max(2.0 * bilip ** 2, bilip * (bilip + 1.0))
        if eps0 is None and measure_eps0:
            eps0 = geometry.eps0_gate(sc, bilip)
        trunc = TruncationSpec.for_curve(sc, k_min, k_max)
        return HarnessConfig(bilip=bilip, dilation=dilation, eps0=eps0,
                             trunc=trunc, seed=seed)


@dataclass(frozen=True)
class TestFunction:
    """One scan input: node values plus the parameters of its jumps."""

    tag: str
    values: np.ndarray
    jumps: tuple = ()


def _param_dist(params, x0, period):
    return np.abs((params - x0 + period / 2.0) % period - period / 2.0)


def adversarial_indicator(sc: SampledCurve, eps: float, n_exp: int | None = None,
                          sign: int = 1, anchor: float = 0.0,
                          bilip: float = 1.0) -> TestFunction:
    """Indicator of the one-sided parametric arc used as necessity witness.

    For eps < 1 the arc is (eps^n, eps) from the anchor; for eps >= 1 it is
    (eps^-n, eps).  The default exponent is the smallest integer making the
    witness's log-integral at least |log eps|; larger exponents deepen the
    arc toward the grid floor.
    """
    if abs(math.log(eps)) < 1e-9:
        raise DomainError("arc scale eps = 1 makes the witness exponent degenerate")
    if n_exp is None:
        if eps < 1.0:
            n_exp = 2 + max(0, math.ceil(2.0 * math.log(bilip) / abs(math.log(eps))))
        else:
            n_exp = max(1, math.ceil(2.0 * math.log(bilip) / math.log(eps)))
    inner = eps ** n_exp if eps < 1.0 else eps ** (-n_exp)
    outer = eps
    h = sc.spacing
    n_nodes = int(math.floor(outer / h)) - int(math.ceil(inner / h)) + 1
    if inner >= outer or n_nodes < 4:
        min_fit = (math.ceil(math.log(4.0 * h) / math.log(eps)) if eps < 1.0
                   else math.floor(math.log(1.0 / (4.0 * h)) / math.log(eps)))
        raise ResolutionError(
            f"adversarial arc ({inner:.3g}, {outer:.3g}) has fewer than 4 grid "
            f"nodes; the deepest exponent fitting this grid is n = {min_fit}")
    rel = ((sc.params - anchor) % sc.period if sign >= 0
           else (anchor - sc.params) % sc.period)
    values = ((rel > inner) & (rel < outer)).astype(complex)
    jumps = ((anchor + (inner if sign >= 0 else -inner)) % sc.period,
             (anchor + (outer if sign >= 0 else -outer)) % sc.period)
    tag = f"adversarial:{eps:.6g}:{n_exp}:{'+' if sign >= 0 else '-'}@{anchor:.6g}"
    return TestFunction(tag=tag, values=values, jumps=jumps)


def deepest_exponent(sc: SampledCurve, eps: float, floor_cells: float = 4.0) -> int:
    """Largest integer exponent keeping the arc's inner end on the grid."""
    target = floor_cells * sc.spacing
    if eps < 1.0:
        return max(1, int(math.floor(math.log(target) / math.log(eps))))
    return max(1, int(math.floor(math.log(1.0 / target) / math.log(eps))))


def anchor_params(p) -> tuple:
    """Landmark parameters where adversarial arcs anchor: polygon corners,
    the spiral focus, or the base point."""
    if "corners" in p.meta:
        return tuple(p.meta["corners"])
    if "focus_param" in p.meta:
        return (0.0, float(p.meta["focus_param"]))
    return (0.0,)


def make_test_functions(sc: SampledCurve, tags, seed: int = 0,
                        bilip: float = 1.0, anchors=(0.0,)) -> tuple:
    """Materialize a list of test-function tags on a sampled grid.

    Adversarial tags contribute the transformed witnesses f = T(indicator):
    the necessity argument constrains the inequality through functions
    whose transform is the indicator, and the transform inverts itself on
    closed curves.
    """
    rng = np.random.default_rng(seed)
    period = sc.period
    out = []
    for tag in tags:
        if tag == "constant":
            out.append(TestFunction("constant", np.ones(sc.n, dtype=complex)))
        elif tag.startswith("trig:"):
            deg = int(tag.split(":", 1)[1])
            if not 1 <= deg <= 64:
                raise DomainError(f"trig degree {deg} out of range 1..64")
            out.append(TestFunction(
                tag, np.exp(2j * math.pi * deg * sc.params / period)))
        elif tag.startswith("chi:"):
            count = int(tag.split(":", 1)[1])
            if not 1 <= count <= 64:
                raise DomainError(f"indicator anchor count {count} out of range 1..64")
            centers = np.sort(rng.uniform(0.0, period, count))
            half = period / 16.0
            for c in centers:
                dist = _param_dist(sc.params, c, period)
                out.append(TestFunction(
                    f"chi@{c:.6g}", (dist < half).astype(complex),
                    jumps=((c - half) % period, (c + half) % period)))
        elif tag == "adversarial":
            for anchor in anchors[:2]:  # symmetric landmarks add nothing
                for k_out in (1, 3):
                    eps = period * 2.0 ** (-k_out)
                    if abs(math.log(eps)) < 1e-9:
                        continue
                    n_exp = deepest_exponent(sc, eps)
                    for sign in (+1, -1):
                        try:
                            chi = adversarial_indicator(
                                sc, eps, n_exp=n_exp, sign=sign,
                                anchor=anchor, bilip=bilip)
                        except ResolutionError:
                            continue
                        witness = pv_cauchy_all(GridFunction(sc, chi.values))
                        out.append(TestFunction("T*" + chi.tag, witness.values,
                                                jumps=chi.jumps))
        else:
            raise DomainError(f"unknown test function tag {tag!r}")
    return tuple(out)


@dataclass(frozen=True)
class DecompositionReport:
    """Terms and residual of the three-part splitting at one (node, eps)."""

    z_index: int
    eps: float
    t_eps: complex
    term_i: complex
    term_ii: complex
    term_iii: complex
    term_iv: complex
    term_v: complex
    branch_value: complex
    residual: float
    i_over_m2: float
    ii_over_m: float
    v_over_m: float


def decomposition_check(f: GridFunction, z_index: int, eps: float,
                        cfg: HarnessConfig) -> DecompositionReport:
    """Evaluate -T_eps f(z) = I + II + III by quadrature and report the
    residual, with III split further through the branch-log factor."""
    sc = f.base
    if eps < 4.0 * sc.spacing - 1e-12:
        raise ResolutionError("need eps >= 4h so the dilated window is resolved")
    big = cfg.dilation * eps
    if big >= sc.period / 2.0:
        raise DomainError(
            f"dilated window {big:.3g} reaches half the period; lower eps")
    tf = pv_cauchy_all(f)
    kt = kernel_truncation_transform(sc, z_index, eps)
    gvals = kernel_transform_direct_fill(kt)
    dist = _param_dist(sc.params, sc.params[z_index], sc.period)
    inball = dist < big
    dw = sc.tangents / np.abs(sc.tangents) * sc.weights
    mu = sc.weights
    mean_ball = np.sum(gvals[inball] * mu[inball]) / np.sum(mu[inball])
    term_i = np.sum(tf.values[inball] * (gvals[inball] - mean_ball) * dw[inball])
    term_ii = mean_ball * np.sum(tf.values[inball] * dw[inball])
    out = ~inball
    term_iii = np.sum(tf.values[out] * gvals[out] * dw[out])
    t_eps = truncated_cauchy(f, z_index, eps)
    residual = abs(t_eps + term_i + term_ii + term_iii)
    branch = geometry.branch_log(sc.source, float(sc.params[z_index]), eps)
    z = sc.points[z_index]
    term_iv = np.sum(tf.values[out] / (z - sc.points[out]) * dw[out]) / math.pi ** 2
    term_v = term_iii - branch.value * term_iv
    m_tf = hl_maximal_all(tf)
    m2_tf = hl_maximal_all(GridFunction(sc, m_tf.astype(complex)))
    return DecompositionReport(
        z_index=z_index, eps=eps, t_eps=complex(t_eps),
        term_i=complex(term_i), term_ii=complex(term_ii),
        term_iii=complex(term_iii), term_iv=complex(term_iv),
        term_v=complex(term_v), branch_value=branch.value,
        residual=float(residual),
        i_over_m2=float(abs(term_i) / max(m2_tf[z_index], UNDERFLOW_FLOOR)),
        ii_over_m=float(abs(term_ii) / max(m_tf[z_index], UNDERFLOW_FLOOR)),
        v_over_m=float(abs(term_v) / max(m_tf[z_index], UNDERFLOW_FLOOR)))


@dataclass(frozen=True)
class FarFieldDecayReport:
    """Worst-case |G| |z-w| / eps outside the dilated window at one node."""

    z_index: int
    eps: float
    worst_ratio: float
    decay_bound: float
    far_nodes: int


def far_field_decay_check(sc: SampledCurve, z_index: int, eps: float,
                          cfg: HarnessConfig) -> FarFieldDecayReport:
    """Measure the far-field remainder of the kernel transform against its
    linear-in-eps decay bound 4L."""
    kt = kernel_truncation_transform(sc, z_index, eps)
    dist = _param_dist(sc.params, sc.params[z_index], sc.period)
    far = (dist > cfg.dilation * eps) & kt.valid
    if not far.any():
        raise DomainError("dilated window swallowed the whole curve")
    branch = geometry.branch_log(sc.source, float(sc.params[z_index]), eps)
    z = sc.points[z_index]
    g_far = kt.values.values[far]
    remainder = math.pi ** 2 * (z - sc.points[far]) * g_far - branch.value
    ratio = np.abs(remainder) * np.abs(z - sc.points[far]) / eps
    return FarFieldDecayReport(z_index=z_index, eps=eps,
                               worst_ratio=float(ratio.max()),
                               decay_bound=4.0 * cfg.bilip,
                               far_nodes=int(far.sum()))


def large_truncation_check(sc: SampledCurve, cfg: HarnessConfig,
                           z_index: int = 0) -> tuple:
    """Sup of |T(K)| outside the dilated window for eps above the threshold.

    Each row is (eps, measured sup, explicit bound at eps0); the bound
    collects the crude window estimates with the measured constants.
    """
    if cfg.eps0 is None:
        raise DomainError("no small-truncation threshold available for this curve")
    length = sc.length
    bilip, dil, eps0 = cfg.bilip, cfg.dilation, cfg.eps0
    bound = (bilip ** 2 * length / (math.pi ** 2 * dil * eps0 ** 2)
             + bilip / (math.pi * dil * eps0)
             + 2.0 * bilip ** 2 / (math.pi ** 2 * dil * eps0))
    rows = []
    for eps in cfg.trunc.eps_grid:
        if eps < eps0 - 1e-15 or cfg.dilation * eps >= sc.period / 2.0:
            continue
        kt = kernel_truncation_transform(sc, z_index, eps)
        dist = _param_dist(sc.params, sc.params[z_index], sc.period)
        far = (dist > dil * eps) & kt.valid
        if not far.any():
            continue
        rows.append((eps, float(np.abs(kt.values.values[far]).max()), bound))
    return tuple(rows)


@dataclass(frozen=True)
class CriterionTable:
    """Scores |F| |log eps| on an (x, eps) grid, plus the trend verdict."""

    rows: tuple          # (x, eps, score, branch_ok)
    profile: tuple       # (eps, max score) by decreasing eps
    verdict: str


def classify_score_profile(scores) -> str:
    """Trend verdict for a score profile ordered by decreasing scale.

    A tail of three levels each climbing at least 10% reads as unbounded;
    profiles that level off (nonincreasing lower half, or lower-half spread
    within a factor 3) read as bounded.
    """
    s = [float(v) for v in scores]
    if len(s) < 3:
        return "indeterminate"
    tail = s[-3:]
    if all(b >= 1.10 * a > 0.0 for a, b in zip(tail[:-1], tail[1:])):
        return "unbounded"
    lower = s[len(s) // 2:]
    if all(b <= a + 1e-12 for a, b in zip(lower[:-1], lower[1:])):
        return "bounded"
    if min(lower) > 0.0 and max(lower) / min(lower) <= 3.0:
        return "bounded"
    return "indeterminate"


def default_scan_params(p, count: int = 64) -> np.ndarray:
    """Uniform anchors plus curve landmarks (corners, focus offsets, and the
    smoothed-corner apexes of recursive curves)."""
    from .curves import spiral_corner_params

    xs = [p.period * np.arange(count) / count]
    if "corners" in p.meta:
        xs.append(np.asarray(p.meta["corners"], dtype=float))
    if "focus_param" in p.meta:
        x0 = float(p.meta["focus_param"])
        offs = p.period * 2.0 ** (-np.arange(2.0, 15.0))
        xs.append(x0 + offs)
        xs.append(x0 - offs)
    if "depth" in p.meta:
        xs.append(np.asarray(spiral_corner_params(p), dtype=float))
    return np.unique(np.concatenate(xs) % p.period)


def criterion_scan(p, x_grid, eps_list) -> CriterionTable:
    """Tabulate |F(x, eps)| |log eps| over the grids; ambiguous branches are
    marked rather than guessed."""
    rows = []
    profile = []
    for eps in sorted(eps_list, reverse=True):
        best = 0.0
        for x in np.asarray(x_grid, dtype=float):
            try:
                val = geometry.branch_log(p, float(x), eps)
            except BranchAmbiguityError:
                rows.append((float(x), eps, math.nan, False))
                continue
            rows.append((float(x), eps, val.condition_score, True))
            best = max(best, val.condition_score)
        profile.append((eps, best))
    return CriterionTable(rows=tuple(rows), profile=tuple(profile),
                          verdict=classify_score_profile([v for _, v in profile]))


@dataclass(frozen=True)
class SandwichReport:
    """Two-sided comparison of |F| against the scaled second difference."""

    worst_violation: float
    trivial_passes: int
    rows: tuple  # (x, eps, ratio_upper, ratio_lower)


def sandwich_check(p, x_grid, eps_list, bilip: float) -> SandwichReport:
    """Worst of |F| eps / (sqrt2 L |D2|) and |D2| / (sqrt2 L eps |F|) over
    the grids; points with vanishing second difference pass trivially."""
    worst = 0.0
    trivial = 0
    rows = []
    c = math.sqrt(2.0) * bilip
    for eps in eps_list:
        d2 = geometry.second_difference(p, np.asarray(x_grid, dtype=float), eps)
        for x, dd in zip(np.asarray(x_grid, dtype=float), d2):
            if dd < 1e-14:
                trivial += 1
                continue
            fval = abs(geometry.branch_log(p, float(x), eps).value)
            up = fval * eps / (c * dd)
            lo = dd / (c * eps * fval)
            rows.append((float(x), eps, up, lo))
            worst = max(worst, up, lo)
    return SandwichReport(worst_violation=worst, trivial_passes=trivial,
                          rows=tuple(rows))


@dataclass(frozen=True)
class CotlarRow:
    n: int
    tag: str
    sup_ratio: float
    arg_node: int
    arg_param: float
    flagged: int


@dataclass(frozen=True)
class CotlarReport:
    """Per-function and per-resolution ratio sups and the trend verdict."""

    rows: tuple
    aggregate: tuple     # (n, sup over the family)
    verdict: str
    node_ratios: tuple   # (n, tag, ndarray) kept for CSV export


def classify_ratio_trend(sups) -> str:
    s = [float(v) for v in sups]
    if len(s) >= 3 and all(b >= 1.10 * a > 0.0 for a, b in zip(s[-3:-1], s[-2:])):
        return "growing"
    if len(s) >= 2 and min(s) > 0.0 and (max(s) - min(s)) / min(s) < 0.25:
        return "stable"
    return "indeterminate"


def cotlar_ratio_scan(p, resolutions, tags=("constant", "trig:1", "trig:3",
                                            "chi:4", "adversarial"),
                      k_min: int = 2, seed: int = 0,
                      bilip: float | None = None) -> CotlarReport:
    """Sup of T_* f / M^2(Tf) per test function and resolution.

    Ratio nodes exclude jump neighborhoods (4 grid cells) and flag
    underflowing denominators.  The verdict classifies the per-resolution
    family sups: bounded variation reads stable, a monotone >= 10% climb
    reads growing.
    """
    if len(resolutions) < 2:
        raise DomainError("trend analysis needs at least two resolutions")
    rows = []
    aggregate = []
    node_ratios = []
    anchors = anchor_params(p)
    for n in resolutions:
        sc = arclength_sample(p, n)
        if bilip is None:
            scl = sc if n <= 2048 else arclength_sample(p, 2048)
            bilip_n = geometry.bilipschitz_constant(scl)
        else:
            bilip_n = bilip
        spec = TruncationSpec.for_curve(sc, k_min, 64)
        guard = JUMP_GUARD_CELLS * sc.spacing
        fam = make_test_functions(sc, tags, seed=seed, bilip=bilip_n,
                                  anchors=anchors)
        agg = 0.0
        for tf_fn in fam:
            f = GridFunction(sc, tf_fn.values)
            tf = pv_cauchy_all(f)
            m2 = hl_maximal_squared(tf).values.real
            t_star, _ = maximal_cauchy_all(f, spec)
            ok = m2 > UNDERFLOW_FLOOR
            flagged = int(np.sum(~ok))
            for j in tf_fn.jumps:
                ok &= _param_dist(sc.params, j, sc.period) >= guard - 1e-12
            ratios = np.where(ok, t_star / np.maximum(m2, UNDERFLOW_FLOOR), 0.0)
            arg = int(np.argmax(ratios))
            rows.append(CotlarRow(n=n, tag=tf_fn.tag,
                                  sup_ratio=float(ratios[arg]), arg_node=arg,
                                  arg_param=float(sc.params[arg]),
                                  flagged=flagged))
            node_ratios.append((n, tf_fn.tag, ratios))
            agg = max(agg, float(ratios[arg]))
        aggregate.append((n, agg))
    verdict = classify_ratio_trend([a for _, a in aggregate])
    return CotlarReport(rows=tuple(rows), aggregate=tuple(aggregate),
                        verdict=verdict, node_ratios=tuple(node_ratios))


def verdicts_agree(criterion_verdict: str, cotlar_verdict: str) -> bool:
    """The headline dichotomy: bounded scores must pair with stable ratios,
    unbounded scores with growing ratios."""
    pairs = {("bounded", "stable"), ("unbounded", "growing")}
    return (criterion_verdict, cotlar_verdict) in pairs
