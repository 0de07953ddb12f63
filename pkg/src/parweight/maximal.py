"""Parabolic fractional maximal functions over finite rectangle families.

The supremum over all sidelengths is replaced by a finite ``ScaleFamily``; the
supremum over rectangle positions is taken over rectangles anchored at cell
centers.  Forward operators average ``|f|`` over ``R^+(gamma)`` and evaluate at
``z(R^-(gamma))`` (centered) or on ``R^-(gamma)`` (uncentered).  Backward
operators are defined through time reflection, which makes the duality between
the two directions exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .field import CellRange, Field, Grid, PrefixAggregate, snap_bounds
from .geometry import (ParabolicRectangle, ParameterError, Params, center_from_lower,
                       center_from_upper, check_gamma, part_bounds, part_volume)

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class ScaleFamily:
    scales: tuple
    xi: float | None = None

    def __init__(self, scales: Iterable[float], xi: float | None = None):
        s = tuple(float(L) for L in scales)
        if xi is not None:
            s = tuple(L for L in s if L >= xi)
        if not s:
            raise ParameterError("scale family is empty")
        if any(L <= 0 for L in s) or any(b <= a for a, b in zip(s, s[1:])):
            raise ParameterError("scales must be positive and strictly increasing")
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "xi", xi)

    def __iter__(self):
        return iter(self.scales)

    def __len__(self):
        return len(self.scales)

    @classmethod
    def ladder(cls, L_min: float, L_max: float, xi: float | None = None) -> "ScaleFamily":
        """Geometric ladder ``L_min * 2^(j/2)`` up to ``L_max``."""
        m = int(math.floor(2 * math.log2(L_max / L_min) + 1e-12))
        return cls([L_min * 2 ** (j / 2) for j in range(m + 1)], xi)

    @classmethod
    def default(cls, grid: Grid, p: float, gamma: float = 0.0) -> "ScaleFamily":
        """Ladder from the smallest rectangle whose halves span a cell to the domain size."""
        hx = max(grid.spacing[:-1])
        ht = grid.spacing[-1]
        L_min = max(hx, (ht / (1 - gamma)) ** (1 / p))
        dom = grid.domain.edges
        L_max = min(min(dom[:-1]), (dom[-1] / 2) ** (1 / p))
        return cls.ladder(L_min, max(L_max, L_min))


def direction_check(direction: str):
    if direction not in (FORWARD, BACKWARD):
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")


class RectFamily:
    """Finite set of parabolic rectangles stored as arrays.

    ``anchor`` optionally records, per rectangle, the grid cell at which the
    centered operator evaluates it.
    """

    def __init__(self, cx, ct, L, p: float, anchor=None):
        cx = np.asarray(cx, dtype=float)
        if cx.ndim == 1:
            cx = cx[:, None]
        self.cx = cx
        self.ct = np.asarray(ct, dtype=float).reshape(len(cx))
        self.L = np.asarray(L, dtype=float).reshape(len(cx))
        self.p = float(p)
        self.anchor = None if anchor is None else np.asarray(anchor, dtype=np.int64)

    @classmethod
    def from_rectangles(cls, rects: Sequence[ParabolicRectangle]) -> "RectFamily":
        if not rects:
            raise ParameterError("rectangle family is empty")
        return cls([r.center_x for r in rects], [r.center_t for r in rects],
                   [r.L for r in rects], rects[0].p)

    @property
    def n(self) -> int:
        return self.cx.shape[1]

    def __len__(self):
        return len(self.L)

    def rect(self, i: int) -> ParabolicRectangle:
        return ParabolicRectangle(self.cx[i], self.ct[i], self.L[i], self.p)

    def part(self, gamma: float, upper: bool):
        return part_bounds(self.cx, self.ct, self.L, self.p, gamma, upper)

    def whole(self):
        hp = self.L ** self.p
        lo = np.concatenate([self.cx - self.L[:, None] / 2, (self.ct - hp)[:, None]], axis=1)
        hi = np.concatenate([self.cx + self.L[:, None] / 2, (self.ct + hp)[:, None]], axis=1)
        return lo, hi

    def part_volume(self, gamma: float) -> np.ndarray:
        return part_volume(self.n, self.L, self.p, gamma)

    def subset(self, mask) -> "RectFamily":
        mask = np.asarray(mask)
        anchor = None if self.anchor is None else self.anchor[mask]
        return RectFamily(self.cx[mask], self.ct[mask], self.L[mask], self.p, anchor)

    def inside(self, domain, gamma: float) -> np.ndarray:
        """Mask of rectangles whose both halves lie in the closed domain box."""
        dlo = np.asarray(domain.lo)
        dhi = np.asarray(domain.hi)
        ok = np.ones(len(self), dtype=bool)
        for upper in (True, False):
            lo, hi = self.part(gamma, upper)
            ok &= np.all(lo >= dlo, axis=1) & np.all(hi <= dhi, axis=1)
        return ok

    def concat(self, other: "RectFamily") -> "RectFamily":
        if self.p != other.p:
            raise ParameterError("cannot merge families with different p")
        anchor = None
        if self.anchor is not None and other.anchor is not None:
            anchor = np.concatenate([self.anchor, other.anchor])
        return RectFamily(np.concatenate([self.cx, other.cx]), np.concatenate([self.ct, other.ct]),
                          np.concatenate([self.L, other.L]), self.p, anchor)


def anchored_family(grid: Grid, scales: ScaleFamily, p: float, gamma: float,
                    anchor_part: str = "lower", cells=None) -> RectFamily:
    """Rectangles whose ``anchor_part`` half is centered at a cell center, one per scale.

    ``cells`` restricts the anchors (array of index tuples); default is every cell.
    """
    check_gamma(gamma)
    if cells is None:
        cells = np.stack(np.meshgrid(*[np.arange(e) for e in grid.extents], indexing="ij"),
                         axis=-1).reshape(-1, grid.dim)
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, grid.dim)
    z = np.asarray(grid.origin) + (cells + 0.5) * np.asarray(grid.spacing)
    shift = center_from_lower if anchor_part == "lower" else center_from_upper
    cx, ct, L, anchor = [], [], [], []
    for s in scales:
        cx.append(z[:, :-1])
        ct.append(shift(None, z[:, -1], s, p, gamma))
        L.append(np.full(len(z), s))
        anchor.append(cells)
    return RectFamily(np.concatenate(cx), np.concatenate(ct), np.concatenate(L), p,
                      np.concatenate(anchor))


def part_values(agg: PrefixAggregate, fam: RectFamily, gamma: float, alpha: float,
                upper: bool = True) -> np.ndarray:
    """``|R^pm(gamma)|^alpha * average of the aggregated field over R^pm(gamma)``.

    Rectangles whose half contains no cell center get 0.
    """
    lo, hi = fam.part(gamma, upper)
    avg = agg.box_averages(lo, hi)
    avg = np.where(np.isnan(avg), 0.0, avg)
    if alpha:
        avg = avg * fam.part_volume(gamma) ** alpha
    return avg


def scatter_max(grid: Grid, lo, hi, values) -> np.ndarray:
    """Pointwise max of ``values[i] * chi(box_i)`` over cells, 0 where no box lands."""
    out = np.zeros(grid.extents)
    a, b = snap_bounds(grid, lo, hi)
    ext = np.asarray(grid.extents)
    a = np.clip(a, 0, ext)
    b = np.clip(b, 0, ext)
    for i in np.flatnonzero(np.all(b > a, axis=1)):
        sl = tuple(slice(x, y) for x, y in zip(a[i], b[i]))
        np.maximum(out[sl], values[i], out=out[sl])
    return out


def family_maximal(f: Field, fam: RectFamily, gamma: float, alpha: float = 0.0,
                   direction: str = FORWARD, centered: bool = False,
                   agg: PrefixAggregate | None = None) -> np.ndarray:
    """Maximal function of ``|f|`` over an explicit rectangle family (direct, no reflection).

    Forward: averages over ``R^+(gamma)``, evaluated at the anchor cell (centered)
    or on every cell of ``R^-(gamma)`` (uncentered).  Backward swaps the halves.
    """
    direction_check(direction)
    grid = f.grid
    if agg is None:
        agg = PrefixAggregate(grid, np.abs(f.values))
    fwd = direction == FORWARD
    vals = part_values(agg, fam, gamma, alpha, upper=fwd)
    if centered:
        if fam.anchor is None:
            raise ParameterError("centered evaluation needs an anchored family")
        out = np.zeros(grid.size)
        flat = np.ravel_multi_index(tuple(fam.anchor.T), grid.extents)
        np.maximum.at(out, flat, vals)
        return out.reshape(grid.extents)
    lo, hi = fam.part(gamma, upper=not fwd)
    return scatter_max(grid, lo, hi, vals)


def _forward_field(f: Field, centered: bool, params: Params, scales: ScaleFamily) -> np.ndarray:
    fam = anchored_family(f.grid, scales, params.p, params.gamma, "lower")
    return family_maximal(f, fam, params.gamma, params.alpha, FORWARD, centered)


def maximal_field(f: Field, direction: str = FORWARD, centered: bool = True,
                  params: Params = Params(), scales: ScaleFamily | None = None) -> Field:
    """Pointwise maximal function on every grid cell.

    The uncentered operator takes the supremum over the same anchored rectangles
    as the centered one (all cells as candidate anchors, all scales), so it
    dominates the centered operator cell by cell.
    """
    direction_check(direction)
    if scales is None:
        scales = ScaleFamily.default(f.grid, params.p, params.gamma)
    if direction == FORWARD:
        vals = _forward_field(f, centered, params, scales)
    else:
        vals = _forward_field(f.reflect_time(), centered, params, scales)[..., ::-1]
    kind = "c" if centered else "u"
    sign = "+" if direction == FORWARD else "-"
    return Field(f.grid, vals, f"M{sign}{kind}({f.name})")


def _point_cells(grid: Grid, point) -> np.ndarray:
    point = tuple(int(i) for i in point)
    if len(point) != grid.dim or any(not 0 <= i < e for i, e in zip(point, grid.extents)):
        raise ParameterError(f"point {point} lies outside the grid {grid.extents}")
    return np.array([point])


def _reflect_index(grid: Grid, idx):
    idx = np.array(idx, dtype=np.int64)
    idx[..., -1] = grid.extents[-1] - 1 - idx[..., -1]
    return idx


def maximal_centered(f: Field, point, direction: str, params: Params,
                     scales: ScaleFamily) -> float:
    direction_check(direction)
    if direction == BACKWARD:
        g = f.reflect_time()
        return maximal_centered(g, tuple(_reflect_index(f.grid, point)), FORWARD, params, scales)
    cells = _point_cells(f.grid, point)
    fam = anchored_family(f.grid, scales, params.p, params.gamma, "lower", cells)
    agg = PrefixAggregate(f.grid, np.abs(f.values))
    vals = part_values(agg, fam, params.gamma, params.alpha, upper=True)
    return float(vals.max(initial=0.0))


def maximal_uncentered(f: Field, point, direction: str, params: Params,
                       scales: ScaleFamily, center_candidates: CellRange | None = None) -> float:
    """Sup over anchored rectangles whose lower half (forward) contains ``point``.

    ``center_candidates`` restricts the anchor cells; by default every cell
    within the largest rectangle footprint of the point is a candidate.
    """
    direction_check(direction)
    grid = f.grid
    if direction == BACKWARD:
        g = f.reflect_time()
        cc = None
        if center_candidates is not None:
            t0, t1 = center_candidates.lo[-1], center_candidates.hi[-1]
            e = grid.extents[-1]
            cc = CellRange(center_candidates.lo[:-1] + (e - t1,), center_candidates.hi[:-1] + (e - t0,))
        return maximal_uncentered(g, tuple(_reflect_index(grid, point)), FORWARD, params, scales, cc)
    pt = _point_cells(grid, point)[0]
    if center_candidates is None:
        Lmax = scales.scales[-1]
        reach = [int(math.ceil(Lmax / h)) + 1 for h in grid.spacing[:-1]]
        reach.append(int(math.ceil(Lmax ** params.p / grid.spacing[-1])) + 1)
        center_candidates = CellRange(tuple(int(i) - r for i, r in zip(pt, reach)),
                                      tuple(int(i) + r + 1 for i, r in zip(pt, reach)))
    c = center_candidates.clipped(grid)
    if c.empty:
        return 0.0
    cells = np.stack(np.meshgrid(*[np.arange(a, b) for a, b in zip(c.lo, c.hi)], indexing="ij"),
                     axis=-1).reshape(-1, grid.dim)
    fam = anchored_family(grid, scales, params.p, params.gamma, "lower", cells)
    lo, hi = fam.part(params.gamma, upper=False)
    a, b = snap_bounds(grid, lo, hi)
    hit = np.all((a <= pt) & (pt < b), axis=1)
    if not hit.any():
        return 0.0
    agg = PrefixAggregate(grid, np.abs(f.values))
    vals = part_values(agg, fam.subset(hit), params.gamma, params.alpha, upper=True)
    return float(vals.max(initial=0.0))


def level_set(field: Field, lam: float) -> np.ndarray:
    """Cell mask ``{field > lam}``."""
    return np.asarray(field.values) > lam
