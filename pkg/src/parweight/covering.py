"""Greedy largest-first selection of parabolic rectangles and overlap trimming.

Given points ``z`` with rectangles ``R_z`` whose lower part is centered at ``z``,
``greedy_select`` keeps, in order of decreasing sidelength, every rectangle
whose point is not yet covered by a kept lower part.  The kept lower parts
overlap boundedly within each dyadic sidelength bucket.  ``trim_sets`` then
removes from each upper part the points covered too often by smaller upper
parts, keeping at least half the mass of ``|f|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field import Field, PrefixAggregate, snap_bounds
from .geometry import ParabolicRectangle, Params, check_gamma, part_bounds


class ContractError(ValueError):
    """An input violates an operation's stated precondition."""


def overlap_bound(n: int, p: float) -> float:
    """Per-bucket overlap bound ``2^(3n+p+2)`` for greedily selected lower parts."""
    return 2.0 ** (3 * n + p + 2)


def trim_count(n: int, p: float, alpha: float, gamma: float) -> int:
    """``c = ceil(2^(9n+3p+11+1/(1-alpha)) / (1-gamma))``."""
    return math.ceil(2.0 ** (9 * n + 3 * p + 11 + 1 / (1 - alpha)) / (1 - gamma))


def trim_overlap_constant(n: int, p: float, alpha: float, gamma: float) -> float:
    """``C2 = 2^(9n+3p+13+1/(1-alpha)) / (1-gamma)``."""
    return 2.0 ** (9 * n + 3 * p + 13 + 1 / (1 - alpha)) / (1 - gamma)


@dataclass(frozen=True)
class SelectionInput:
    points: np.ndarray
    rects: tuple
    gamma: float = 0.0

    def __init__(self, items: Sequence, gamma: float = 0.0, tol: float = 1e-12):
        check_gamma(gamma)
        rects = tuple(R for _, R in items)
        if rects:
            pts = np.array([np.asarray(z, dtype=float) for z, _ in items]).reshape(len(rects), -1)
        else:
            pts = np.empty((0, 0))
        for z, R in zip(pts, rects):
            c = lower_center(R, gamma)
            if not np.allclose(z, c, rtol=0, atol=tol * max(1.0, np.abs(c).max())):
                raise ContractError(f"point {tuple(z)} is not the lower-part center {c}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "rects", rects)
        object.__setattr__(self, "gamma", float(gamma))

    def __len__(self):
        return len(self.rects)

    @property
    def L(self) -> np.ndarray:
        return np.array([R.L for R in self.rects])

    def lower_bounds(self):
        return _bounds(self.rects, self.gamma, upper=False)

    def upper_bounds(self):
        return _bounds(self.rects, self.gamma, upper=True)


def lower_center(R: ParabolicRectangle, gamma: float) -> tuple:
    return R.center_x + (R.center_t - (1 + gamma) * R.L ** R.p / 2,)


def _bounds(rects, gamma, upper):
    if not rects:
        return np.zeros((0, 0)), np.zeros((0, 0))
    cx = np.array([R.center_x for R in rects])
    ct = np.array([R.center_t for R in rects])
    L = np.array([R.L for R in rects])
    return part_bounds(cx, ct, L, rects[0].p, gamma, upper)


def in_lower_parts(z, lo, hi) -> np.ndarray:
    """Mask of lower parts (closed cube, open time interval) containing ``z``."""
    z = np.asarray(z, dtype=float)
    space = np.all((lo[:, :-1] <= z[:-1]) & (z[:-1] <= hi[:, :-1]), axis=1)
    return space & (lo[:, -1] < z[-1]) & (z[-1] < hi[:, -1])


@dataclass
class Selection:
    selected: list
    log: list = field(default_factory=list)

    def log_json(self) -> list:
        return self.log


def greedy_select(inp: SelectionInput) -> Selection:
    """Largest sidelength first, ties by input order; skip points already covered."""
    if len(inp) == 0:
        return Selection([], [])
    order = sorted(range(len(inp)), key=lambda i: (-inp.rects[i].L, i))
    lo, hi = inp.lower_bounds()
    kept = []
    log = []
    for i in order:
        entry = {"index": i, "sidelength": inp.rects[i].L, "point": [float(c) for c in inp.points[i]]}
        if kept:
            hit = in_lower_parts(inp.points[i], lo[kept], hi[kept])
            if hit.any():
                entry["status"] = "discarded"
                entry["by"] = int(kept[int(np.argmax(hit))])
                log.append(entry)
                continue
        kept.append(i)
        entry["status"] = "kept"
        log.append(entry)
    return Selection(kept, log)


def selection_violations(inp: SelectionInput, sel: Selection) -> dict:
    """Coverage and antichain failures, replayed from scratch."""
    lo, hi = inp.lower_bounds()
    kept = np.array(sel.selected, dtype=np.int64)
    uncovered = [i for i in range(len(inp))
                 if not in_lower_parts(inp.points[i], lo[kept], hi[kept]).any()]
    antichain = []
    for pos, i in enumerate(sel.selected):
        earlier = kept[:pos]
        if len(earlier) and in_lower_parts(inp.points[i], lo[earlier], hi[earlier]).any():
            antichain.append(i)
    return {"uncovered": uncovered, "antichain": antichain}


def bucket_of(L) -> np.ndarray:
    """Bucket ``k`` with ``2^(-k-1) < L <= 2^-k``."""
    L = np.asarray(L, dtype=float)
    k = np.floor(-np.log2(L)).astype(np.int64)
    k = np.where(2.0 ** (-k) < L, k - 1, k)
    k = np.where(2.0 ** (-k - 1) >= L, k + 1, k)
    return k


def _max_depth(lo: np.ndarray, hi: np.ndarray, axis: int) -> int:
    """Max number of boxes sharing an interior point of the arrangement."""
    if len(lo) == 0:
        return 0
    if axis == lo.shape[1] - 1:
        # sweep; at equal coordinates closings come before openings
        events = sorted([(a, 1) for a in lo[:, axis]] + [(b, -1) for b in hi[:, axis]],
                        key=lambda e: (e[0], e[1]))
        best = cur = 0
        for _, d in events:
            cur += d
            best = max(best, cur)
        return best
    ends = np.unique(np.concatenate([lo[:, axis], hi[:, axis]]))
    best = 0
    for m in (ends[:-1] + ends[1:]) / 2:
        sel = (lo[:, axis] < m) & (m < hi[:, axis])
        if sel.sum() > best:
            best = max(best, _max_depth(lo[sel], hi[sel], axis + 1))
    return best


def max_overlap(lo, hi) -> int:
    """``max_z sum_i chi_{B_i}(z)`` over points off the box boundaries (a.e. supremum)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    keep = np.all(hi > lo, axis=1) if len(lo) else np.zeros(0, bool)
    return _max_depth(lo[keep], hi[keep], 0)


def scale_bucket_overlap(selected: Sequence[ParabolicRectangle], gamma: float, k: int) -> int:
    """Max overlap of lower parts ``R^-(gamma)`` with ``2^(-k-1) < L <= 2^-k``."""
    rects = [R for R in selected if bucket_of(R.L) == k]
    if not rects:
        return 0
    lo, hi = _bounds(rects, gamma, upper=False)
    return max_overlap(lo, hi)


def bucket_overlaps(selected: Sequence[ParabolicRectangle], gamma: float) -> dict:
    ks = sorted({int(bucket_of(R.L)) for R in selected})
    return {k: scale_bucket_overlap(selected, gamma, k) for k in ks}


@dataclass
class SelectionResult:
    selected: list
    trimmed: list
    c: int
    C2: float
    J: list = field(default_factory=list)
    mass_ratio: list = field(default_factory=list)
    f_overlap: int = 0

    @property
    def mass_ok(self) -> bool:
        return all(m >= 0.5 * (1 - 1e-12) for m in self.mass_ratio)

    @property
    def overlap_ok(self) -> bool:
        return self.f_overlap <= self.C2


def _cell_masks(grid, lo, hi) -> list:
    a, b = snap_bounds(grid, lo, hi)
    ext = np.asarray(grid.extents)
    a = np.clip(a, 0, ext)
    b = np.maximum(np.clip(b, 0, ext), a)
    return [tuple(slice(x, y) for x, y in zip(a[i], b[i])) for i in range(len(a))]


def upper_values(f: Field, rects: Sequence[ParabolicRectangle], gamma: float, alpha: float) -> np.ndarray:
    """``|R^+(gamma)|^alpha`` times the snapped average of ``|f|`` over ``R^+(gamma)``."""
    lo, hi = _bounds(list(rects), gamma, upper=True)
    agg = PrefixAggregate(f.grid, np.abs(f.values))
    avg = agg.box_averages(lo, hi)
    avg = np.where(np.isnan(avg), 0.0, avg)
    vol = np.prod(hi - lo, axis=1)
    return avg * vol ** alpha if alpha else avg


def trim_sets(selected: Sequence[ParabolicRectangle], f: Field, params: Params, lam: float,
              c: int | None = None) -> SelectionResult:
    """Build ``J_i``, ``G_i^{2c}`` and ``F_i = R_i^+ minus G_i^{2c}`` on grid cells.

    Requires ``lam < |R_i^+|^alpha avg |f| <= 2 lam`` for every selected rectangle.
    ``c`` defaults to the proof's count; overriding it only changes the threshold.
    """
    n, p, a, g = params.n, params.p, params.alpha, params.gamma
    c_def = trim_count(n, p, a, g)
    C2 = trim_overlap_constant(n, p, a, g)
    c = c_def if c is None else int(c)
    rects = list(selected)
    if not rects:
        return SelectionResult([], [], c, C2)
    vals = upper_values(f, rects, g, a)
    bad = np.flatnonzero(~((vals > lam) & (vals <= 2 * lam * (1 + 1e-12))))
    if len(bad):
        i = int(bad[0])
        raise ContractError(f"rectangle {i} has value {vals[i]!r} outside ({lam!r}, {2 * lam!r}]")
    grid = f.grid
    lo, hi = _bounds(rects, g, upper=True)
    slices = _cell_masks(grid, lo, hi)
    absf = np.abs(f.values)
    L = np.array([R.L for R in rects])
    inter = np.all(np.maximum(lo[:, None], lo[None]) < np.minimum(hi[:, None], hi[None]), axis=2)
    F_overlap = np.zeros(grid.extents, dtype=np.int64)
    trimmed, J, ratios = [], [], []
    for i in range(len(rects)):
        Ji = [j for j in np.flatnonzero(inter[i] & (L < L[i]))]
        count = np.zeros(grid.extents, dtype=np.int64)
        for j in Ji:
            count[slices[j]] += 1
        Ri = np.zeros(grid.extents, dtype=bool)
        Ri[slices[i]] = True
        F = Ri & (count < 2 * c)
        full = absf[Ri].sum()
        ratios.append(1.0 if full == 0 else float(absf[F].sum() / full))
        F_overlap += F
        trimmed.append(F)
        J.append([int(j) for j in Ji])
    return SelectionResult(rects, trimmed, c, C2, J, ratios, int(F_overlap.max()))


def level_set_items(f: Field, params: Params, scales, lam: float) -> SelectionInput:
    """Items ``(z, R_z)`` for every cell ``z`` with ``lam < M f(z) <= 2 lam``.

    ``R_z`` is the rectangle attaining the centered forward maximal value at ``z``
    (first scale on ties), so each item meets the trimming precondition.
    """
    from .maximal import anchored_family, part_values

    grid = f.grid
    fam = anchored_family(grid, scales, params.p, params.gamma, "lower")
    agg = PrefixAggregate(grid, np.abs(f.values))
    vals = part_values(agg, fam, params.gamma, params.alpha, upper=True)
    m = len(scales)
    vals = vals.reshape(m, grid.size)
    best = vals.argmax(axis=0)
    M = vals[best, np.arange(grid.size)]
    E = np.flatnonzero((M > lam) & (M <= 2 * lam))
    items = []
    for cell in E:
        i = best[cell] * grid.size + cell
        R = fam.rect(i)
        items.append((lower_center(R, params.gamma), R))
    return SelectionInput(items, params.gamma)
