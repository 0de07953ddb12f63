"""Uniform grids on R^{n+1}, sampled fields, and prefix-sum box aggregation.

Cells are indexed on the infinite lattice extending the grid; a box "contains"
a cell when the cell center lies in the half-open box ``[lo, hi)``.  Sums over
boxes that leave the grid treat the field as zero outside, while cell counts
keep the exterior cells, so averages are normalized by the full box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Box, ParameterError


class DegenerateBoxError(ValueError):
    """A box contains no cell center, so its average is undefined."""


@dataclass(frozen=True)
class Grid:
    origin: tuple
    spacing: tuple
    extents: tuple

    def __init__(self, origin, spacing, extents):
        origin = tuple(float(o) for o in origin)
        spacing = tuple(float(h) for h in spacing)
        extents = tuple(int(e) for e in extents)
        if not len(origin) == len(spacing) == len(extents):
            raise ParameterError("grid origin, spacing and extents differ in length")
        if any(h <= 0 for h in spacing) or any(e <= 0 for e in extents):
            raise ParameterError("grid spacing and extents must be positive")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "extents", extents)

    @classmethod
    def unit(cls, n: int, cells: int, t_cells: int | None = None, t_length: float = 1.0):
        """``[0,1]^n x [0, t_length]`` with ``cells`` per spatial axis."""
        t_cells = cells if t_cells is None else t_cells
        return cls([0.0] * (n + 1), [1.0 / cells] * n + [t_length / t_cells],
                   [cells] * n + [t_cells])

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def n(self) -> int:
        return self.dim - 1

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def size(self) -> int:
        return math.prod(self.extents)

    @property
    def domain(self) -> Box:
        return Box(self.origin, [o + h * e for o, h, e in
                                 zip(self.origin, self.spacing, self.extents)])

    def axis_centers(self, axis: int, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = self.extents[axis] if stop is None else stop
        return self.origin[axis] + (np.arange(start, stop) + 0.5) * self.spacing[axis]

    def centers(self) -> np.ndarray:
        """Cell centers, shape ``extents + (dim,)``."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def center_of(self, index) -> tuple:
        return tuple(o + (i + 0.5) * h for o, h, i in zip(self.origin, self.spacing, index))


def snap_bounds(grid: Grid, lo, hi):
    """Lattice index ranges ``[a, b)`` of cells whose centers lie in ``[lo, hi)``.

    ``lo`` and ``hi`` have shape (..., dim).  Indices refer to the infinite
    lattice and are not clipped to the grid.  The initial guess from division is
    corrected against the exact center comparison, so the result agrees with a
    direct membership scan even at floating-point ties.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    o = np.asarray(grid.origin)
    h = np.asarray(grid.spacing)

    def first_at_least(x):
        i = np.ceil((x - o) / h - 0.5)
        i = np.where(o + (i - 1 + 0.5) * h >= x, i - 1, i)
        i = np.where(o + (i + 0.5) * h < x, i + 1, i)
        return i.astype(np.int64)

    a = first_at_least(lo)
    b = np.maximum(first_at_least(hi), a)
    return a, b


@dataclass(frozen=True)
class CellRange:
    lo: tuple
    hi: tuple

    @property
    def empty(self) -> bool:
        return any(b <= a for a, b in zip(self.lo, self.hi))

    @property
    def count(self) -> int:
        return math.prod(max(b - a, 0) for a, b in zip(self.lo, self.hi))

    def clipped(self, grid: Grid) -> "CellRange":
        lo = tuple(min(max(a, 0), e) for a, e in zip(self.lo, grid.extents))
        hi = tuple(min(max(b, 0), e) for b, e in zip(self.hi, grid.extents))
        hi = tuple(max(a, b) for a, b in zip(lo, hi))
        return CellRange(lo, hi)

    def slices(self, grid: Grid) -> tuple:
        c = self.clipped(grid)
        return tuple(slice(a, b) for a, b in zip(c.lo, c.hi))


def snap_box(grid: Grid, box: Box) -> CellRange:
    """Cells of the (infinite) lattice with center in ``[box.lo, box.hi)``."""
    a, b = snap_bounds(grid, box.lo, box.hi)
    return CellRange(tuple(int(i) for i in a), tuple(int(i) for i in b))


class Field:
    """Sampled function on a grid; ``name`` is a free label such as f, w, v or sigma."""

    def __init__(self, grid: Grid, values, name: str = "f"):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.extents:
            values = values.reshape(grid.extents)
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)
        self.name = name

    @classmethod
    def constant(cls, grid: Grid, c: float, name: str = "f"):
        return cls(grid, np.full(grid.extents, float(c)), name)

    def map(self, fn, name: str | None = None) -> "Field":
        return Field(self.grid, fn(self.values), self.name if name is None else name)

    def reflect_time(self) -> "Field":
        """The field ``g(x, t) = f(x, -t)`` on the reflected grid."""
        g = self.grid
        t_end = g.origin[-1] + g.spacing[-1] * g.extents[-1]
        grid = Grid(g.origin[:-1] + (-t_end,), g.spacing, g.extents)
        return Field(grid, self.values[..., ::-1].copy(), self.name)

    def integral(self, power: float = 1.0) -> float:
        v = np.abs(self.values)
        return float(np.sum(v ** power) * self.grid.cell_volume)

    def aggregate(self) -> "PrefixAggregate":
        return PrefixAggregate(self.grid, self.values)

    def __repr__(self):
        return f"Field({self.name!r}, extents={self.grid.extents})"


class PrefixAggregate:
    """Inclusive prefix sums of ``values * cell_volume`` for O(2^dim) box sums.

    Accumulation runs in extended precision so inclusion-exclusion on small
    boxes does not lose digits against the grand total.
    """

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float).reshape(grid.extents)
        if np.isnan(values).any():
            raise ParameterError("field contains NaN")
        self.grid = grid
        self.infinite = ~np.isfinite(values)
        cum = np.zeros(tuple(e + 1 for e in grid.extents), dtype=np.longdouble)
        inner = np.where(self.infinite, 0.0, values).astype(np.longdouble) * grid.cell_volume
        for axis in range(grid.dim):
            inner = np.cumsum(inner, axis=axis)
        cum[(slice(1, None),) * grid.dim] = inner
        self.cumulative = cum
        self._inf_cum = None
        if self.infinite.any():
            c = np.zeros(cum.shape, dtype=np.int64)
            inner = self.infinite.astype(np.int64)
            for axis in range(grid.dim):
                inner = np.cumsum(inner, axis=axis)
            c[(slice(1, None),) * grid.dim] = inner
            self._inf_cum = c

    def _range_sum(self, cum, a, b):
        ext = np.asarray(self.grid.extents)
        a = np.clip(a, 0, ext)
        b = np.clip(b, 0, ext)
        b = np.maximum(a, b)
        total = np.zeros(a.shape[:-1], dtype=cum.dtype)
        d = self.grid.dim
        for corner in range(1 << d):
            idx = []
            sign = 1
            for axis in range(d):
                if corner >> axis & 1:
                    idx.append(a[..., axis])
                    sign = -sign
                else:
                    idx.append(b[..., axis])
            total = total + sign * cum[tuple(idx)]
        return total

    def range_sums(self, a, b) -> np.ndarray:
        """Sum of value*cellvol over lattice index ranges ``[a, b)`` (clipped to the grid)."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        s = self._range_sum(self.cumulative, a, b).astype(float)
        if self._inf_cum is not None:
            bad = self._range_sum(self._inf_cum, a, b) > 0
            s = np.where(bad, np.inf, s)
        return s

    def box_sums(self, lo, hi):
        """Vectorized (sum, cell count) for boxes with corners of shape (..., dim)."""
        a, b = snap_bounds(self.grid, lo, hi)
        counts = np.prod(b - a, axis=-1)
        return self.range_sums(a, b), counts

    def box_sum(self, box: Box) -> float:
        s, _ = self.box_sums(np.array(box.lo), np.array(box.hi))
        return float(s)

    def box_average(self, box: Box) -> float:
        s, c = self.box_sums(np.array(box.lo), np.array(box.hi))
        if c == 0:
            raise DegenerateBoxError(f"box {box} contains no cell center")
        return float(s / (c * self.grid.cell_volume))

    def box_averages(self, lo, hi) -> np.ndarray:
        """Vectorized averages; NaN where a box snaps to no cell."""
        s, c = self.box_sums(lo, hi)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(c > 0, s / (np.maximum(c, 1) * self.grid.cell_volume), np.nan)


def box_average(agg: PrefixAggregate, box: Box) -> float:
    return agg.box_average(box)


def weighted_measure(agg: PrefixAggregate, mask) -> float:
    """``w(A) = sum over masked cells of value * cellvol``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != agg.grid.extents:
        raise ParameterError(f"mask shape {mask.shape} does not match grid {agg.grid.extents}")
    values = _values_from_cumulative(agg)
    return float(np.sum(values[mask]))


def _values_from_cumulative(agg: PrefixAggregate) -> np.ndarray:
    v = agg.cumulative
    for axis in range(agg.grid.dim):
        v = np.diff(v, axis=axis)
    v = v.astype(float)
    return np.where(agg.infinite, np.inf, v)


# -- "parfield v1" text format ---------------------------------------------

MAGIC = "parfield v1"


def write_field(field: Field, path) -> None:
    g = field.grid
    lines = [MAGIC,
             f"{g.dim} dims: " + " ".join(str(e) for e in g.extents),
             "origin: " + " ".join(repr(o) for o in g.origin),
             "spacing: " + " ".join(repr(h) for h in g.spacing)]
    lines.extend(repr(float(x)) for x in field.values.ravel(order="C"))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class FieldFormatError(ValueError):
    pass


def read_field(path, name: str = "f") -> Field:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if len(text) < 4 or text[0].strip() != MAGIC:
        raise FieldFormatError(f"{path}: missing '{MAGIC}' header")
    try:
        head, _, rest = text[1].partition("dims:")
        dim = int(head.split()[0])
        extents = [int(e) for e in rest.split()]
        origin = [float(o) for o in text[2].split(":", 1)[1].split()]
        spacing = [float(h) for h in text[3].split(":", 1)[1].split()]
    except (ValueError, IndexError) as exc:
        raise FieldFormatError(f"{path}: malformed header ({exc})") from None
    if not len(extents) == len(origin) == len(spacing) == dim:
        raise FieldFormatError(f"{path}: header dimensions disagree")
    values = [float(x) for x in text[4:] if x.strip()]
    if len(values) != math.prod(extents):
        raise FieldFormatError(f"{path}: expected {math.prod(extents)} values, got {len(values)}")
    return Field(Grid(origin, spacing, extents), np.array(values), name)
