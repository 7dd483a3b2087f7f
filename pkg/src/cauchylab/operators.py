"""Discrete singular-integral operators on sampled curves: truncated,
principal-value, and maximal Cauchy transforms over parametric balls, the
Hardy-Littlewood maximal operator, and the kernel-truncation transform.

Conventions: the excluded set is always the parametric ball (parameter
interval of radius eps), nodes exactly on the exclusion boundary carry half
weight in Cauchy sums, and the complex measure at a node is its unit chord
tangent times its arc weight.  Sweeps over all nodes run in row blocks and
are deterministic regardless of block size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .curves import SampledCurve
from .errors import DomainError, ResolutionError

__all__ = [
    "GridFunction",
    "TruncationSpec",
    "KernelWindow",
    "KernelTransform",
    "MaximalValue",
    "truncated_cauchy",
    "pv_cauchy",
    "pv_cauchy_all",
    "truncated_cauchy_all",
    "maximal_cauchy",
    "maximal_cauchy_all",
    "hl_maximal",
    "hl_maximal_all",
    "hl_maximal_squared",
    "kernel_truncation_transform",
    "transform_csv_rows",
]

_BLOCK = 192
_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class GridFunction:
    """Complex node values attached to a sampled curve."""

    base: SampledCurve
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.base.n,):
            raise DomainError(
                f"grid function has {vals.shape} values for {self.base.n} nodes")
        if not np.all(np.isfinite(vals.view(float))):
            raise DomainError("grid function values must be finite")
        object.__setattr__(self, "values", vals)

    @staticmethod
    def constant(base: SampledCurve, c: complex) -> "GridFunction":
        return GridFunction(base, np.full(base.n, complex(c)))


@dataclass(frozen=True)
class TruncationSpec:
    """Decreasing dyadic truncation levels eps_k = period * 2^-k."""

    period: float
    k_min: int
    k_max: int
    eps_floor: float

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise DomainError("empty truncation grid")
        if self.period * 2.0 ** (-self.k_max) < self.eps_floor - 1e-12:
            raise DomainError("truncation grid dips below the resolution floor")

    @staticmethod
    def for_curve(sc: SampledCurve, k_min: int, k_max: int) -> "TruncationSpec":
        """Clamp k_max so every level resolves at least two grid cells."""
        floor = 2.0 * sc.spacing
        deepest = int(math.floor(math.log2(sc.n / 2.0)))
        if k_min > deepest:
            raise DomainError(
                f"k_min={k_min} already below the floor at n={sc.n}")
        return TruncationSpec(period=sc.period, k_min=k_min,
                              k_max=min(k_max, deepest), eps_floor=floor)

    @property
    def eps_grid(self) -> tuple:
        return tuple(self.period * 2.0 ** (-k)
                     for k in range(self.k_min, self.k_max + 1))

    @property
    def k_grid(self) -> tuple:
        return tuple(range(self.k_min, self.k_max + 1))


@dataclass(frozen=True)
class KernelWindow:
    """A truncation window: center node and parametric radius."""

    center_index: int
    eps: float


class MaximalValue(NamedTuple):
    value: float
    eps_argmax: float


def _unit_measure(sc: SampledCurve) -> np.ndarray:
    """Complex node measure: unit chord tangent times arc weight."""
    return sc.tangents / np.abs(sc.tangents) * sc.weights


def _window_split(eps: float, h: float, n: int):
    """Interior half-width and boundary flag for the parametric eps-ball.

    Nodes at offsets 1..inner are strictly inside; when eps lands on the
    grid (within tolerance) the offset-(inner+1) nodes sit exactly on the
    boundary and carry half weight.
    """
    ratio = eps / h
    near = round(ratio)
    if abs(ratio - near) < _BOUNDARY_TOL and near >= 1:
        inner, boundary = int(near) - 1, True
    else:
        inner, boundary = int(math.floor(ratio)), False
    inner = min(inner, (n - 1) // 2)
    return inner, boundary


def _check_eps(sc: SampledCurve, eps: float):
    if eps < 2.0 * sc.spacing - 1e-12 * sc.period:
        raise ResolutionError(
            f"truncation {eps:.3e} below the floor 2h = {2 * sc.spacing:.3e}; "
            "refine the grid")
    if eps > sc.period / 2.0:
        raise DomainError("truncation exceeds half the period")


def truncated_cauchy(f: GridFunction, z_index: int, eps: float) -> complex:
    """Trapezoid sum of the eps-truncated Cauchy integral at one node."""
    sc = f.base
    _check_eps(sc, eps)
    n, h = sc.n, sc.spacing
    inner, boundary = _window_split(eps, h, n)
    z = sc.points[z_index]
    contrib = f.values * _unit_measure(sc)
    offsets = (np.arange(n) - z_index) % n
    dist = np.minimum(offsets, n - offsets)
    scale = np.where(dist > inner + (1 if boundary else 0), 1.0,
                     np.where(boundary & (dist == inner + 1), 0.5, 0.0))
    scale[z_index] = 0.0
    dz = sc.points - z
    dz[z_index] = 1.0  # excluded; avoid 0/0
    total = np.sum(contrib * scale / dz)
    return complex(total / (1j * math.pi))


def pv_cauchy(f: GridFunction, z_index: int) -> complex:
    """Principal value via first-order Richardson from levels 2h and 4h."""
    h = f.base.spacing
    t2 = truncated_cauchy(f, z_index, 2.0 * h)
    t4 = truncated_cauchy(f, z_index, 4.0 * h)
    return 2.0 * t2 - t4


def _sweep_windows(f: GridFunction, inner_list, boundary_list):
    """All-nodes truncated sums for several exclusion windows at once.

    Returns a (n_windows, n) complex array; entry [w, i] is the transform
    at node i with the w-th exclusion window.  Row blocks keep memory flat;
    assembly order is deterministic.
    """
    sc = f.base
    n = sc.n
    contrib_full = f.values * _unit_measure(sc)
    pts = sc.points
    m_max = max(inner + (1 if boundary else 0)
                for inner, boundary in zip(inner_list, boundary_list))
    out = np.empty((len(inner_list), n), dtype=complex)
    base_idx = np.arange(-m_max, m_max + 1)
    for start in range(0, n, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, n))
        dz = pts[None, :] - pts[rows, None]
        dz[np.arange(len(rows)), rows] = 1.0
        c = contrib_full[None, :] / dz
        c[np.arange(len(rows)), rows] = 0.0
        row_sums = c.sum(axis=1)
        idx = (rows[:, None] + base_idx[None, :]) % n
        near = np.take_along_axis(c, idx, axis=1)
        pref = np.cumsum(near, axis=1)
        center = m_max  # column of offset 0
        for w, (inner, boundary) in enumerate(zip(inner_list, boundary_list)):
            if inner >= 1:
                ball = pref[:, center + inner] - pref[:, center - inner - 1]
            else:
                ball = near[:, center]
            if boundary:
                if 2 * (inner + 1) == n:  # both boundary offsets hit the antipode
                    ball = ball + 0.5 * near[:, center + inner + 1]
                else:
                    ball = ball + 0.5 * (near[:, center - inner - 1]
                                         + near[:, center + inner + 1])
            out[w, rows] = row_sums - ball
    return out / (1j * math.pi)


def pv_cauchy_all(f: GridFunction) -> GridFunction:
    """Richardson principal value at every node (one blocked sweep)."""
    if f.base.n < 16:
        raise DomainError("grid too small for the 2h/4h extrapolation")
    vals = _sweep_windows(f, [1, 3], [True, True])
    return GridFunction(f.base, 2.0 * vals[0] - vals[1])


def truncated_cauchy_all(f: GridFunction, spec: TruncationSpec) -> dict:
    """Truncated transforms at every node for each dyadic level of spec."""
    sc = f.base
    inner_list, boundary_list = [], []
    for eps in spec.eps_grid:
        _check_eps(sc, eps)
        inner, boundary = _window_split(eps, sc.spacing, sc.n)
        inner_list.append(inner)
        boundary_list.append(boundary)
    vals = _sweep_windows(f, inner_list, boundary_list)
    return {k: vals[i] for i, k in enumerate(spec.k_grid)}


def maximal_cauchy(f: GridFunction, z_index: int, spec: TruncationSpec) -> MaximalValue:
    """Sup over the dyadic truncation grid of |T_eps f| at one node."""
    best, arg = -1.0, None
    for eps in spec.eps_grid:
        v = abs(truncated_cauchy(f, z_index, eps))
        if v > best:
            best, arg = v, eps
    return MaximalValue(best, arg)


def maximal_cauchy_all(f: GridFunction, spec: TruncationSpec):
    """Vectorized maximal transform: (values, argmax eps) per node."""
    table = truncated_cauchy_all(f, spec)
    ks = list(table)
    stack = np.abs(np.stack([table[k] for k in ks]))
    arg = np.argmax(stack, axis=0)
    eps_arr = np.array([spec.period * 2.0 ** (-k) for k in ks])
    return stack.max(axis=0), eps_arr[arg]


def _ball_average(absvals, weights, i, m_incl):
    n = len(absvals)
    if m_incl >= (n - 1) // 2:
        return float(np.sum(absvals * weights) / np.sum(weights))
    offs = (np.arange(n) - i) % n
    dist = np.minimum(offs, n - offs)
    mask = dist <= m_incl
    return float(np.sum(absvals[mask] * weights[mask]) / np.sum(weights[mask]))


def _hl_radii(sc: SampledCurve):
    """Dyadic parametric radii from 2h up to half the period, plus the full curve."""
    ms = []
    k = 1
    while True:
        r = sc.period * 2.0 ** (-k)
        if r < 2.0 * sc.spacing - 1e-12:
            break
        q = r / sc.spacing
        near = round(q)
        m_incl = int(near) - 1 if abs(q - near) < _BOUNDARY_TOL else int(math.floor(q))
        ms.append(max(m_incl, 1))
        k += 1
    ms.append(sc.n)  # full curve
    return ms


def hl_maximal(g: GridFunction, z_index: int) -> float:
    """Max over dyadic parametric balls of the average of |g|."""
    sc = g.base
    absvals = np.abs(g.values)
    w = sc.weights
    return max(_ball_average(absvals, w, z_index, m) for m in _hl_radii(sc))


def hl_maximal_all(g: GridFunction) -> np.ndarray:
    """hl_maximal at every node via circular rolling sums."""
    sc = g.base
    n = sc.n
    absvals = np.abs(g.values)
    w = sc.weights
    vw = absvals * w
    pref_vw = np.concatenate(([0.0], np.cumsum(np.concatenate([vw, vw, vw]))))
    pref_w = np.concatenate(([0.0], np.cumsum(np.concatenate([w, w, w]))))
    out = np.full(n, np.sum(vw) / np.sum(w))
    idx = np.arange(n)
    for m in _hl_radii(sc):
        if m >= (n - 1) // 2:
            continue
        lo = idx - m + n
        hi = idx + m + n
        num = pref_vw[hi + 1] - pref_vw[lo]
        den = pref_w[hi + 1] - pref_w[lo]
        np.maximum(out, num / den, out=out)
    return out


def hl_maximal_squared(g: GridFunction) -> GridFunction:
    """Twice-iterated maximal operator as a grid function."""
    once = GridFunction(g.base, hl_maximal_all(g).astype(complex))
    return GridFunction(g.base, hl_maximal_all(once).astype(complex))


@dataclass(frozen=True)
class KernelTransform:
    """g = T(K) for a truncated kernel K, with near-center validity mask."""

    window: KernelWindow
    kernel: GridFunction
    values: GridFunction
    valid: np.ndarray


def truncated_kernel(sc: SampledCurve, z_index: int, eps: float) -> GridFunction:
    """The Cauchy kernel at z, zeroed on the parametric eps-ball (half at
    the exact boundary)."""
    _check_eps(sc, eps)
    n = sc.n
    inner, boundary = _window_split(eps, sc.spacing, n)
    offsets = (np.arange(n) - z_index) % n
    dist = np.minimum(offsets, n - offsets)
    scale = np.where(dist > inner + (1 if boundary else 0), 1.0,
                     np.where(boundary & (dist == inner + 1), 0.5, 0.0))
    scale[z_index] = 0.0
    dz = sc.points - sc.points[z_index]
    dz[z_index] = 1.0
    vals = scale / (1j * math.pi * dz)
    return GridFunction(sc, vals)


def kernel_truncation_transform(sc: SampledCurve, z_index: int, eps: float) -> KernelTransform:
    """Apply the principal-value transform to the truncated kernel.

    Nodes within 2h of the center are marked unevaluated (mask False,
    value 0): the Richardson rule is not meaningful that close to the
    excluded ball.
    """
    kernel = truncated_kernel(sc, z_index, eps)
    pv = pv_cauchy_all(kernel)
    n = sc.n
    offsets = (np.arange(n) - z_index) % n
    dist = np.minimum(offsets, n - offsets)
    valid = dist > 2
    vals = np.where(valid, pv.values, 0.0)
    return KernelTransform(window=KernelWindow(z_index, eps), kernel=kernel,
                           values=GridFunction(sc, vals), valid=valid)


def kernel_transform_direct_fill(kt: KernelTransform) -> np.ndarray:
    """Values with the near-center nodes filled by plain trapezoid sums.

    The kernel vanishes identically near those nodes, so the full sum has
    no singular part there and needs no principal-value treatment.
    """
    sc = kt.kernel.base
    vals = kt.values.values.copy()
    contrib = kt.kernel.values * _unit_measure(sc)
    for i in np.nonzero(~kt.valid)[0]:
        dz = sc.points - sc.points[i]
        dz[i] = 1.0
        c = contrib / dz
        c[i] = 0.0
        vals[i] = np.sum(c) / (1j * math.pi)
    return vals


def transform_csv_rows(sc: SampledCurve, quantity: str, values, eps_label="",
                       node_subset=None):
    """Rows node,param,quantity,epsilon,re,im for one transform quantity."""
    rows = []
    nodes = range(sc.n) if node_subset is None else node_subset
    for i in nodes:
        v = complex(values[i])
        rows.append(f"{i},{sc.params[i]:.17g},{quantity},{eps_label},"
                    f"{v.real:.17g},{v.imag:.17g}")
    return rows
