"""Two-weight constants over finite rectangle families.

Every constant is a maximum over an explicit ``RectFamily`` of a product of
averages over the two halves of each rectangle.  Zero values of ``v`` where a
negative power of ``v`` is averaged make that rectangle's term ``+inf``; the
report then names the rectangle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .field import Field, Grid, PrefixAggregate, snap_bounds
from .geometry import ParameterError, Params, check_gamma
from .maximal import (BACKWARD, RectFamily, ScaleFamily, anchored_family,
                      family_maximal)
from .reports import ConstantReport, VerificationReport


@dataclass(frozen=True)
class WeightPair:
    w: Field
    v: Field

    def __post_init__(self):
        if self.w.grid != self.v.grid:
            raise ParameterError("w and v live on different grids")
        if (np.asarray(self.w.values) < 0).any() or (np.asarray(self.v.values) < 0).any():
            raise ParameterError("weights must be nonnegative")

    @property
    def grid(self) -> Grid:
        return self.w.grid

    def map(self, fw, fv) -> "WeightPair":
        return WeightPair(self.w.map(fw, "w"), self.v.map(fv, "v"))


def default_family(grid: Grid, p: float, gamma: float, scales: ScaleFamily | None = None,
                   anchor_part: str = "lower") -> RectFamily:
    """Anchored rectangles over all cells and scales with both halves inside the domain."""
    if scales is None:
        scales = ScaleFamily.default(grid, p, gamma)
    fam = anchored_family(grid, scales, p, gamma, anchor_part)
    fam = fam.subset(fam.inside(grid.domain, gamma))
    if len(fam) == 0:
        raise ParameterError("no rectangle of the scale family fits inside the domain")
    return fam


def _pow(values, e):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.power(np.asarray(values, dtype=float), e)


def _averages(field_values, grid, fam: RectFamily, gamma: float, upper: bool) -> np.ndarray:
    agg = PrefixAggregate(grid, field_values)
    lo, hi = fam.part(gamma, upper)
    return agg.box_averages(lo, hi)


def _report(terms: np.ndarray, fam: RectFamily, name: str) -> ConstantReport:
    terms = np.where(np.isnan(terms), -np.inf, terms)
    if len(terms) == 0 or np.all(terms == -np.inf):
        return ConstantReport(0.0, None, len(fam), name)
    i = int(np.argmax(terms))
    return ConstantReport(float(terms[i]), fam.rect(i).as_dict(), len(fam), name)


def a_qr_terms(pair: WeightPair, q: float, r: float, gamma: float, fam: RectFamily) -> np.ndarray:
    if q <= 1:
        raise ParameterError(f"the (q, r) constant needs q > 1, got q={q}")
    qc = q / (q - 1)
    g = pair.grid
    wa = _averages(_pow(pair.w.values, r), g, fam, gamma, upper=False)
    va = _averages(_pow(pair.v.values, -qc), g, fam, gamma, upper=True)
    with np.errstate(invalid="ignore"):
        t = _pow(wa, 1 / r) * _pow(va, 1 / qc)
    # 0 * inf: w vanishes on the lower half, v on the upper
    return np.where(np.isinf(va) & (wa > 0), np.inf, np.where(np.isinf(va), 0.0, t))


def a_qr_constant(pair: WeightPair, params: Params, gamma: float, family: RectFamily) -> ConstantReport:
    """``max_R (avg_{R^-} w^r)^(1/r) (avg_{R^+} v^(-q'))^(1/q')``."""
    check_gamma(gamma)
    return _report(a_qr_terms(pair, params.q, params.r, gamma, family), family, "aqr")


def box_minima(values: np.ndarray, grid: Grid, lo, hi) -> np.ndarray:
    """Minimum over the snapped in-grid cells of each box; ``+inf`` when none."""
    a, b = snap_bounds(grid, lo, hi)
    ext = np.asarray(grid.extents)
    a = np.clip(a, 0, ext)
    b = np.maximum(np.clip(b, 0, ext), a)
    shape = b - a
    out = np.full(len(a), np.inf)
    values = np.asarray(values, dtype=float)
    for s in np.unique(shape, axis=0):
        if np.any(s == 0):
            continue
        sel = np.flatnonzero(np.all(shape == s, axis=1))
        win = np.lib.stride_tricks.sliding_window_view(values, tuple(int(x) for x in s))
        mins = win.min(axis=tuple(range(grid.dim, 2 * grid.dim)))
        out[sel] = mins[tuple(a[sel].T)]
    return out


def a_1r_terms(pair: WeightPair, r: float, gamma: float, fam: RectFamily) -> np.ndarray:
    g = pair.grid
    wa = _averages(_pow(pair.w.values, r), g, fam, gamma, upper=False)
    lo, hi = fam.part(gamma, upper=True)
    vmin = box_minima(pair.v.values, g, lo, hi)
    num = _pow(wa, 1 / r)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / vmin
    return np.where(vmin == 0, np.where(num > 0, np.inf, 0.0), t)


def a_1r_constant(pair: WeightPair, r: float, gamma: float, family: RectFamily) -> ConstantReport:
    """``max_R (avg_{R^-} w^r)^(1/r) / min_{R^+} v``."""
    if r < 1:
        raise ParameterError(f"r must be >= 1, got {r}")
    check_gamma(gamma)
    return _report(a_1r_terms(pair, r, gamma, family), family, "a1r")


def muckenhoupt_constant(pair: WeightPair, params: Params, gamma: float, family: RectFamily) -> ConstantReport:
    """The (q, r) constant, or its q = 1 form."""
    if params.q == 1:
        return a_1r_constant(pair, params.r, gamma, family)
    return a_qr_constant(pair, params, gamma, family)


def a1_pointwise_gap(pair: WeightPair, r: float, gamma: float, scales: ScaleFamily | None = None,
                     family: RectFamily | None = None, p: float = 1.0) -> dict:
    """Compare ``max_z (M^-(w^r))^(1/r)(z) / v(z)`` with the (1, r) constant.

    The backward uncentered operator and the constant share ``family`` (by
    default every in-domain anchored rectangle over ``scales``), so both ratios
    ``gap / constant`` and ``constant / gap`` are at most 1.
    """
    g = pair.grid
    if family is None:
        family = default_family(g, p, gamma, scales)
    wr = Field(g, _pow(pair.w.values, r), "w^r")
    M = family_maximal(wr, family, gamma, 0.0, BACKWARD, centered=False)
    lhs = _pow(M, 1 / r)
    v = np.asarray(pair.v.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(v == 0, np.where(lhs > 0, np.inf, 0.0), lhs / np.where(v == 0, 1, v))
    gap = float(q.max())
    const = a_1r_constant(pair, r, gamma, family).value
    return {"gap": gap, "constant": const,
            "gap_over_constant": _ratio(gap, const), "constant_over_gap": _ratio(const, gap)}


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 0.0 if a == 0 else math.inf
    if math.isinf(a) and math.isinf(b):
        return 1.0
    return a / b


def bump_terms(pair: WeightPair, q: float, s: float, gamma: float, fam: RectFamily) -> np.ndarray:
    if q <= 1 or s <= 1:
        raise ParameterError(f"bump constant needs q, s > 1 (q={q}, s={s})")
    g = pair.grid
    wa = _averages(pair.w.values, g, fam, gamma, upper=False)
    va = _averages(_pow(pair.v.values, s / (1 - q)), g, fam, gamma, upper=True)
    with np.errstate(invalid="ignore"):
        t = wa * _pow(va, (q - 1) / s)
    return np.where(np.isinf(va), np.where(wa > 0, np.inf, 0.0), t)


def bump_constant(pair: WeightPair, q: float, s: float, gamma: float, family: RectFamily) -> ConstantReport:
    """``max_R (avg_{R^-} w) (avg_{R^+} v^(s/(1-q)))^((q-1)/s)``."""
    check_gamma(gamma)
    return _report(bump_terms(pair, q, s, gamma, family), family, "bump")


def bump_exponent(q: float, s: float) -> float:
    """``t`` with ``t - 1 = (q - 1)/s``."""
    return 1 + (q - 1) / s


# -- Sawyer testing constant ---------------------------------------------------

def sawyer_terms(pair: WeightPair, q: float, r: float, alpha: float, family: RectFamily,
                 operator_family: RectFamily) -> np.ndarray:
    """Per-rectangle testing ratios; NaN where ``sigma(R^+) = 0``.

    The operator is the uncentered forward maximal function (no time lag) over
    ``operator_family``; ``M(sigma chi_{R^+})`` is evaluated on the cells of ``R``.
    """
    if q <= 1:
        raise ParameterError(f"Sawyer constant needs q > 1, got {q}")
    g = pair.grid
    qc = q / (q - 1)
    sigma = _pow(pair.v.values, 1 - qc)
    if not np.isfinite(sigma).all():
        raise ParameterError("sigma = v^(1-q') is not finite; v vanishes somewhere")
    sagg = PrefixAggregate(g, sigma)
    w = np.asarray(pair.w.values, dtype=float)

    up_lo, up_hi = family.part(0.0, upper=True)
    ra, rb = snap_bounds(g, up_lo, up_hi)
    wa_lo, wa_hi = family.whole()
    wa, wb = snap_bounds(g, wa_lo, wa_hi)

    op_up = snap_bounds(g, *operator_family.part(0.0, upper=True))
    op_dn = snap_bounds(g, *operator_family.part(0.0, upper=False))
    op_count = np.prod(op_up[1] - op_up[0], axis=1)
    op_scale = operator_family.part_volume(0.0) ** alpha if alpha else np.ones(len(operator_family))
    ext = np.asarray(g.extents)
    h = g.cell_volume

    out = np.full(len(family), np.nan)
    for i in range(len(family)):
        mass = float(sagg.range_sums(ra[i], rb[i]))
        if mass <= 0:
            warnings.warn(f"rectangle {i}: sigma(R^+) = 0, skipped", RuntimeWarning, stacklevel=2)
            continue
        lo = np.clip(wa[i], 0, ext)
        hi = np.maximum(np.clip(wb[i], 0, ext), lo)
        if np.any(hi <= lo):
            out[i] = 0.0
            continue
        # operator rectangles whose upper part meets R^+ and whose lower part meets R
        ia = np.maximum(op_up[0], ra[i])
        ib = np.minimum(op_up[1], rb[i])
        meets = np.all(ib > ia, axis=1) & (op_count > 0)
        meets &= np.all((op_dn[1] > lo) & (op_dn[0] < hi), axis=1)
        idx = np.flatnonzero(meets)
        cells = np.stack(np.meshgrid(*[np.arange(x, y) for x, y in zip(lo, hi)], indexing="ij"),
                         axis=-1).reshape(-1, g.dim)
        M = np.zeros(len(cells))
        if len(idx):
            vals = sagg.range_sums(ia[idx], ib[idx]) / (op_count[idx] * h) * op_scale[idx]
            inside = np.all((op_dn[0][idx][None] <= cells[:, None]) &
                            (cells[:, None] < op_dn[1][idx][None]), axis=2)
            M = np.where(inside, vals[None], 0.0).max(axis=1)
        integral = float(np.sum(M ** r * w[tuple(cells.T)]) * h)
        out[i] = mass ** (-1 / q) * integral ** (1 / r)
    return out


def sawyer_constant(pair: WeightPair, q: float, r: float, alpha: float, family: RectFamily,
                    scales: ScaleFamily | None = None,
                    operator_family: RectFamily | None = None) -> ConstantReport:
    """``max_R sigma(R^+)^(-1/q) (int_R M_alpha(sigma chi_{R^+})^r w)^(1/r)``, ``sigma = v^(1-q')``.

    The operator family defaults to every cell-anchored rectangle over ``scales``.
    """
    if operator_family is None:
        if scales is None:
            scales = ScaleFamily.default(pair.grid, family.p)
        operator_family = anchored_family(pair.grid, scales, family.p, 0.0, "lower")
    return _report(sawyer_terms(pair, q, r, alpha, family, operator_family), family, "sawyer")


# -- closure under max / min -----------------------------------------------------

def minmax_closure_check(pair1: WeightPair, pair2: WeightPair, params: Params, gamma: float,
                         family: RectFamily) -> VerificationReport:
    """Constants of the pointwise max and min pairs are at most the sum of the two constants."""
    c1 = muckenhoupt_constant(pair1, params, gamma, family).value
    c2 = muckenhoupt_constant(pair2, params, gamma, family).value
    hi = WeightPair(Field(pair1.grid, np.maximum(pair1.w.values, pair2.w.values), "w"),
                    Field(pair1.grid, np.maximum(pair1.v.values, pair2.v.values), "v"))
    lo = WeightPair(Field(pair1.grid, np.minimum(pair1.w.values, pair2.w.values), "w"),
                    Field(pair1.grid, np.minimum(pair1.v.values, pair2.v.values), "v"))
    cmax = muckenhoupt_constant(hi, params, gamma, family).value
    cmin = muckenhoupt_constant(lo, params, gamma, family).value
    bound = c1 + c2
    slack = 1e-9
    return VerificationReport(
        theorem="closure", lhs=max(cmax, cmin), rhs=bound, paper_constant=1.0, slack=slack,
        meta={"q": params.q, "r": params.r, "gamma": gamma, "family_size": len(family),
              "max_pair": cmax, "min_pair": cmin, "pair1": c1, "pair2": c2},
        checks={"max": cmax <= bound * (1 + slack), "min": cmin <= bound * (1 + slack)})
