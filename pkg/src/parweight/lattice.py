"""Parabolic dyadic lattices, their translates, and dyadic maximal functions.

A lattice is built top-down from its coarsest level ``k_min``.  Level ``k_min``
cells have spatial side ``2^-k_min`` and time length ``2^(-k_min p - 1)``; each
refinement halves every spatial edge and splits the time interval into
``floor(2^p)`` or ``ceil(2^p)`` equal parts, whichever keeps

    2^(-kp-2) <= l_t(S^-_k) <= 2^(-kp-1).

Since every cell of a level is split the same way, a level is a product of a
shifted dyadic grid in space and a uniform partition of time, and cells are
addressed by integer indices ``(ix, it)``.

Spatial shifts follow the one-third trick: the grid labelled ``t in {0,1,2}^n``
has level-k cubes ``2^-k ([0,1)^n + ix + (-1)^k t/3)``, which nest across
levels.  Time translates shift the root partition by ``j T0 / D`` with ``D``
coprime to both split counts, so the translates stay spread out at every
level.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .field import Field, Grid, PrefixAggregate, snap_bounds
from .geometry import Box, ParabolicRectangle, ParameterError, Params
from .reports import VerificationReport


class ResourceError(RuntimeError):
    """A requested construction exceeds the configured cell budget."""


class NoParentError(LookupError):
    pass


@dataclass(frozen=True)
class DyadicRect:
    level: int
    spatial_index: tuple
    time_index: int
    s_minus: Box
    s_plus: Box
    r_plus: Box

    def widened_rectangle(self, p: float) -> ParabolicRectangle:
        """Parabolic rectangle R whose upper half R^+ (gamma = 0) is ``r_plus``."""
        L = 2.0 ** (-self.level)
        c = self.r_plus.center
        return ParabolicRectangle(c[:-1], self.r_plus.lo[-1], L, p)


def split_counts(p: float) -> tuple:
    b = 2.0 ** p
    return math.floor(b), math.ceil(b)


def _exact_pow2p(p: float) -> bool:
    return float(p).is_integer()


class DyadicLattice:
    def __init__(self, n: int, p: float, k_min: int, k_max: int,
                 spatial_shift: Sequence[int] = (), time_root_offset: float = 0.0,
                 domain: Box | None = None):
        if p < 1:
            raise ParameterError(f"p must be >= 1, got {p}")
        if k_max < k_min:
            raise ParameterError(f"empty level range [{k_min}, {k_max}]")
        shift = tuple(int(s) for s in spatial_shift) or (0,) * n
        if len(shift) != n or any(s not in (0, 1, 2) for s in shift):
            raise ParameterError(f"spatial shift must be n digits in {{0,1,2}}, got {spatial_shift}")
        self.n = int(n)
        self.p = float(p)
        self.k_min = int(k_min)
        self.k_max = int(k_max)
        self.spatial_shift = shift
        self.time_root_offset = float(time_root_offset)
        self.domain = domain
        lo_split, hi_split = split_counts(self.p)
        # per-level split count and cumulative product, kept as exact integers
        self._splits = {}
        self._prod = {self.k_min: 1}
        exact = _exact_pow2p(self.p)
        T0 = self.root_length_exact() if exact else 2.0 ** (-self.k_min * self.p - 1)
        length = T0
        for k in range(self.k_min + 1, self.k_max + 1):
            bound = Fraction(2) ** int(-k * self.p - 1) if exact else 2.0 ** (-k * self.p - 1)
            m = lo_split if length / lo_split < bound else hi_split
            self._splits[k] = m
            self._prod[k] = self._prod[k - 1] * m
            length = T0 / self._prod[k]
        self.T0 = float(T0)

    # -- lengths -----------------------------------------------------------

    def root_length_exact(self):
        e = -self.k_min * self.p - 1
        if _exact_pow2p(self.p):
            return Fraction(2) ** int(e)
        return 2.0 ** e

    def time_length_exact(self, k: int):
        """Exact ``Fraction`` when 2^p is an integer, else float."""
        self._check_level(k)
        return self.root_length_exact() / self._prod[k]

    def time_length(self, k: int) -> float:
        return float(self.time_length_exact(k))

    def space_length(self, k: int) -> float:
        return 2.0 ** (-k)

    def split(self, k: int) -> int:
        """Number of time pieces each level-(k-1) cell is cut into."""
        return self._splits[k]

    @property
    def levels(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def _check_level(self, k: int):
        if not self.k_min <= k <= self.k_max:
            raise ParameterError(f"level {k} outside [{self.k_min}, {self.k_max}]")

    def space_offset(self, k: int) -> np.ndarray:
        sign = 1 if k % 2 == 0 else -1
        return sign * np.asarray(self.spatial_shift, dtype=float) / 3.0

    # -- indices and boxes -------------------------------------------------

    def cell_of(self, k: int, z) -> tuple:
        """Indices of the level-k cell (half-open) containing point ``z``."""
        z = np.asarray(z, dtype=float)
        ell = self.space_length(k)
        ix = np.floor(z[:-1] / ell - self.space_offset(k)).astype(np.int64)
        it = int(np.floor((z[-1] - self.time_root_offset) / self.time_length(k)))
        return tuple(int(i) for i in ix), it

    def cell_bounds(self, k: int, ix, it):
        """Corners of lattice cells ``(ix, it)``; ``ix`` shape (N, n), ``it`` shape (N,)."""
        ix = np.asarray(ix, dtype=float).reshape(-1, self.n)
        it = np.asarray(it, dtype=float).reshape(-1)
        ell = self.space_length(k)
        lt = self.time_length(k)
        xlo = ell * (ix + self.space_offset(k))
        xhi = ell * (ix + 1 + self.space_offset(k))
        tlo = self.time_root_offset + it * lt
        thi = self.time_root_offset + (it + 1) * lt
        return (np.concatenate([xlo, tlo[:, None]], axis=1),
                np.concatenate([xhi, thi[:, None]], axis=1))

    def rect_bounds(self, k: int, ix, it):
        """(s_minus, s_plus, r_plus) corner pairs for rectangles indexed by their S^-."""
        it = np.asarray(it).reshape(-1)
        sm = self.cell_bounds(k, ix, it)
        sp = self.cell_bounds(k, ix, it + 1)
        rlo = sp[0].copy()
        rhi = sp[1].copy()
        rhi[:, -1] = rlo[:, -1] + 2.0 ** (-k * self.p)
        return sm, sp, (rlo, rhi)

    def rect(self, k: int, ix, it: int) -> DyadicRect:
        self._check_level(k)
        ix = tuple(int(i) for i in np.atleast_1d(ix))
        (a, b), (c, d), (e, f) = self.rect_bounds(k, [ix], [it])
        return DyadicRect(k, ix, int(it), Box(a[0], b[0]), Box(c[0], d[0]), Box(e[0], f[0]))

    def indices_in(self, k: int, region: Box):
        """Index arrays of level-k cells meeting ``region`` in positive measure."""
        self._check_level(k)
        ell = self.space_length(k)
        off = self.space_offset(k)
        lt = self.time_length(k)
        ranges = []
        for a in range(self.n):
            i0 = math.floor(region.lo[a] / ell - off[a])
            i1 = math.ceil(region.hi[a] / ell - off[a])
            ranges.append(range(i0, max(i1, i0 + 1)))
        t0 = math.floor((region.lo[-1] - self.time_root_offset) / lt)
        t1 = math.ceil((region.hi[-1] - self.time_root_offset) / lt)
        ranges.append(range(t0, max(t1, t0 + 1)))
        count = math.prod(len(r) for r in ranges)
        if count > 50_000_000:
            raise ResourceError(f"level {k} has {count} cells in {region}")
        mesh = np.stack(np.meshgrid(*[np.arange(r.start, r.stop) for r in ranges], indexing="ij"),
                        axis=-1).reshape(-1, self.n + 1)
        lo, hi = self.cell_bounds(k, mesh[:, :-1], mesh[:, -1])
        keep = np.all(hi > np.asarray(region.lo), axis=1) & np.all(lo < np.asarray(region.hi), axis=1)
        mesh = mesh[keep]
        return mesh[:, :-1], mesh[:, -1]

    def rects_in(self, k: int, region: Box | None = None) -> list:
        region = region or self.domain
        if region is None:
            raise ParameterError("lattice has no domain; pass a region")
        ix, it = self.indices_in(k, region)
        return [self.rect(k, a, b) for a, b in zip(ix, it)]

    # -- hierarchy ---------------------------------------------------------

    def parent_index(self, k: int, ix, it):
        """Indices of the level-(k-1) cell containing cell ``(ix, it)`` of level k."""
        if k <= self.k_min:
            raise NoParentError(f"level {k} is the coarsest level")
        sign = 1 if k % 2 == 0 else -1
        t = np.asarray(self.spatial_shift, dtype=np.int64)
        ix = np.asarray(ix, dtype=np.int64)
        return (ix + sign * t) // 2, np.asarray(it, dtype=np.int64) // self._splits[k]

    def children_index(self, k: int, ix, it):
        """All level-(k+1) cells inside cell ``(ix, it)`` of level k."""
        if k >= self.k_max:
            return []
        sign = 1 if k % 2 == 0 else -1
        t = np.asarray(self.spatial_shift, dtype=np.int64)
        base = 2 * np.asarray(ix, dtype=np.int64) + sign * t
        m = self._splits[k + 1]
        out = []
        for bits in itertools.product((0, 1), repeat=self.n):
            for j in range(m):
                out.append((tuple(int(v) for v in base + np.array(bits)), int(it) * m + j))
        return out

    def children(self, S: DyadicRect) -> list:
        return [self.rect(S.level + 1, a, b) for a, b in
                self.children_index(S.level, S.spatial_index, S.time_index)]

    def parent(self, S: DyadicRect) -> DyadicRect:
        ix, it = self.parent_index(S.level, S.spatial_index, S.time_index)
        return self.rect(S.level - 1, ix, int(it))

    # -- invariants --------------------------------------------------------

    def sidelength_violations(self, tol: float = 1e-12) -> list:
        """Levels whose time length breaks ``2^(-kp-2) <= l_t <= 2^(-kp-1)``."""
        bad = []
        exact = _exact_pow2p(self.p)
        for k in self.levels:
            lt = self.time_length_exact(k)
            if exact:
                lo = Fraction(2) ** int(-k * self.p - 2)
                hi = Fraction(2) ** int(-k * self.p - 1)
                ok = lo <= lt <= hi
            else:
                lo = 2.0 ** (-k * self.p - 2)
                hi = 2.0 ** (-k * self.p - 1)
                ok = lo * (1 - tol) <= lt <= hi * (1 + tol)
            if not ok:
                bad.append((k, float(lt)))
        return bad

    def dump_lines(self, region: Box | None = None) -> list:
        """``k ix... it s_minus_lo... s_minus_hi...`` tab-separated, one per rectangle."""
        lines = []
        for k in self.levels:
            for S in self.rects_in(k, region):
                cols = [str(k), *map(str, S.spatial_index), str(S.time_index),
                        *map(repr, S.s_minus.lo), *map(repr, S.s_minus.hi)]
                lines.append("\t".join(cols))
        return lines

    def label(self) -> dict:
        return {"spatial_shift": list(self.spatial_shift), "time_root_offset": self.time_root_offset}


def build_lattice(domain: Box | None, k_min: int, k_max: int, p: float,
                  spatial_shift=0, time_root_offset: float = 0.0, n: int | None = None) -> DyadicLattice:
    """Build a lattice; ``spatial_shift`` is a digit tuple or an integer label in [0, 3^n)."""
    if n is None:
        if domain is None:
            raise ParameterError("need a domain or an explicit n")
        n = domain.dim - 1
    if isinstance(spatial_shift, (int, np.integer)):
        spatial_shift = shift_digits(int(spatial_shift), n)
    return DyadicLattice(n, p, k_min, k_max, spatial_shift, time_root_offset, domain)


def shift_digits(label: int, n: int) -> tuple:
    if not 0 <= label < 3 ** n:
        raise ParameterError(f"shift label must lie in [0, {3 ** n}), got {label}")
    return tuple((label // 3 ** a) % 3 for a in range(n))


def parent(lattice: DyadicLattice, S: DyadicRect) -> DyadicRect:
    return lattice.parent(S)


def _widened_ok(lat: DyadicLattice, k: int, child_cells, parent_cells, tol: float) -> bool:
    # r_plus is determined by the S^+ cell: same cube, bottom of the cell, length 2^-kp
    (clo, chi) = lat.cell_bounds(k, *child_cells)
    (plo, phi) = lat.cell_bounds(k - 1, *parent_cells)
    chi = chi.copy()
    phi = phi.copy()
    chi[:, -1] = clo[:, -1] + 2.0 ** (-k * lat.p)
    phi[:, -1] = plo[:, -1] + 2.0 ** (-(k - 1) * lat.p)
    scale = np.maximum(1.0, np.abs(np.concatenate([clo, chi, plo, phi], axis=1))).max(axis=1)
    eps = tol * scale[:, None]
    return bool(np.all(clo >= plo - eps) and np.all(chi <= phi + eps))


def widened_nesting_check(lattice: DyadicLattice, region: Box | None = None,
                          tol: float = 1e-12) -> bool:
    """True iff ``R^+`` of every S^+ cell lies in ``R^+`` of the S^+ cell containing it.

    Nesting is tested on S^+ cells: if S^+_k lies in S^+_{k-1} then R^+_k lies in
    R^+_{k-1}.  Every child position inside representative parents is checked at
    every level; with ``region`` (or a lattice domain) all cells there are checked too.
    """
    lat = lattice
    region = region or lat.domain
    for k in range(lat.k_min + 1, lat.k_max + 1):
        reps = [(np.zeros(lat.n, dtype=np.int64), 0), (np.full(lat.n, 3), 7),
                (np.full(lat.n, -5), -11)]
        kids, pars = [], []
        for pix, pit in reps:
            for cix, cit in lat.children_index(k - 1, pix, pit):
                kids.append((cix, cit))
                pars.append((tuple(pix), pit))
        if region is not None and math.prod(
                [max(1, region.edges[a] / lat.space_length(k) + 2) for a in range(lat.n)]
                + [region.edges[-1] / lat.time_length(k) + 2]) < 200_000:
            ix, it = lat.indices_in(k, region)
            pix, pit = lat.parent_index(k, ix, it)
            kids.extend(zip(map(tuple, ix), it))
            pars.extend(zip(map(tuple, pix), pit))
        cix = np.array([c[0] for c in kids]).reshape(-1, lat.n)
        cit = np.array([c[1] for c in kids])
        pix = np.array([c[0] for c in pars]).reshape(-1, lat.n)
        pit = np.array([c[1] for c in pars])
        if not _widened_ok(lat, k, (cix, cit), (pix, pit), tol):
            return False
    return True


def _coprime_denominator(count: int, p: float) -> int:
    a, b = split_counts(p)
    D = count
    while math.gcd(D, a) != 1 or math.gcd(D, b) != 1:
        D += 1
    return D


class LatticeFamily(list):
    """The ``3^n * ceil(2^(5p))`` translated lattices used for covering arguments."""

    def __init__(self, members, time_denominator: int):
        super().__init__(members)
        self.time_denominator = time_denominator


def family_size(n: int, p: float) -> int:
    return 3 ** n * math.ceil(2.0 ** (5 * p))


def build_family(domain: Box | None, k_min: int, k_max: int, p: float, n: int | None = None,
                 cell_budget: int = 10_000_000) -> LatticeFamily:
    """All spatial shifts crossed with ``ceil(2^(5p))`` time-root translates.

    Translate ``j`` shifts the root partition by ``j * T0 / D``, where ``D`` is the
    least integer >= ``ceil(2^(5p))`` coprime to both split counts.
    """
    if n is None:
        n = domain.dim - 1
    nt = math.ceil(2.0 ** (5 * p))
    size = 3 ** n * nt
    if size * (k_max - k_min + 1) > cell_budget:
        raise ResourceError(f"family of {size} lattices x {k_max - k_min + 1} levels exceeds "
                            f"the budget of {cell_budget}")
    D = _coprime_denominator(nt, p)
    T0 = 2.0 ** (-k_min * p - 1)
    members = []
    for label in range(3 ** n):
        for j in range(nt):
            members.append(build_lattice(domain, k_min, k_max, p, label, j * T0 / D, n=n))
    return LatticeFamily(members, D)


def cover_levels(L: float, k_min: int, k_max: int) -> list:
    """Levels k with ``8 L <= 2^-k < 32 L`` inside the lattice range."""
    k_hi = math.floor(-math.log2(8 * L))
    out = [k for k in (k_hi, k_hi - 1) if k_min <= k <= k_max and 8 * L <= 2.0 ** (-k) < 32 * L]
    return out


def find_cover(R: ParabolicRectangle, family: Sequence[DyadicLattice]):
    """Find ``(index, S)`` with ``R^+ in S^+``, ``z(R^-) in S^-`` and comparable sides.

    Returns ``None`` when no member qualifies.
    """
    if not family:
        return None
    first = family[0]
    up = R.upper(0.0)
    z_t = R.center_t - R.L ** R.p / 2
    dom = first.domain
    if dom is not None and not dom.contains_box(up):
        return None
    levels = cover_levels(R.L, first.k_min, first.k_max)
    x_lo = np.asarray(up.lo[:-1])
    x_hi = np.asarray(up.hi[:-1])
    t_lo, t_hi = up.lo[-1], up.hi[-1]
    groups = _family_groups(family)
    for k in levels:
        ell = 2.0 ** (-k)
        for shift, (ids, taus) in groups.items():
            lat = family[ids[0]]
            off = lat.space_offset(k)
            ix = np.floor(x_lo / ell - off)
            if np.any(ell * (ix + 1 + off) < x_hi) or np.any(ell * (ix + off) > x_lo):
                continue
            lt = lat.time_length(k)
            j = np.floor((t_lo - taus) / lt)
            ok = (taus + (j + 1) * lt >= t_hi) & (taus + j * lt <= t_lo)
            ok &= (taus + (j - 1) * lt <= z_t) & (z_t < taus + j * lt)
            hits = np.flatnonzero(ok)
            if len(hits):
                h = hits[0]
                member = family[ids[h]]
                return ids[h], member.rect(k, ix.astype(np.int64), int(j[h]) - 1)
    return None


def _family_groups(family) -> dict:
    cache = getattr(family, "_groups", None)
    if cache is not None:
        return cache
    groups = {}
    for i, lat in enumerate(family):
        groups.setdefault(lat.spatial_shift, ([], []))
        groups[lat.spatial_shift][0].append(i)
        groups[lat.spatial_shift][1].append(lat.time_root_offset)
    groups = {s: (ids, np.array(t)) for s, (ids, t) in groups.items()}
    try:
        family._groups = groups
    except AttributeError:
        pass
    return groups


def cover_bounds_hold(R: ParabolicRectangle, S: DyadicRect) -> dict:
    """The containment and four comparability conditions for a cover hit."""
    up = R.upper(0.0)
    z = R.center_x + (R.center_t - R.L ** R.p / 2,)
    lx_r, lt_r = R.L, R.L ** R.p
    lx_s = S.s_plus.edges[0]
    lt_s = S.s_plus.edges[-1]
    p = R.p
    zin = all(a <= c < b for a, b, c in zip(S.s_minus.lo, S.s_minus.hi, z))
    return {
        "contains": S.s_plus.contains_box(up),
        "z_in_s_minus": zin,
        "space_lower": 8 * lx_r <= lx_s,
        "space_upper": lx_s < 32 * lx_r,
        "time_lower": 2 ** (3 * p - 2) * lt_r <= lt_s,
        "time_upper": lt_s < 2 ** (5 * p - 1) * lt_r,
    }


# -- dyadic maximal function -------------------------------------------------

class DyadicPieces:
    """Snapped S^- / S^+ cell ranges of every lattice rectangle meeting a grid."""

    def __init__(self, lattice: DyadicLattice, grid: Grid, levels=None):
        self.lattice = lattice
        self.grid = grid
        self.levels = list(lattice.levels if levels is None else levels)
        region = grid.domain
        ks, ixs, its = [], [], []
        for k in self.levels:
            ix, it = lattice.indices_in(k, region)
            ks.append(np.full(len(it), k))
            ixs.append(ix)
            its.append(it)
        self.k = np.concatenate(ks)
        self.ix = np.concatenate(ixs).reshape(-1, lattice.n)
        self.it = np.concatenate(its)
        sm_lo, sm_hi, sp_lo, sp_hi, rp_lo, rp_hi = [], [], [], [], [], []
        for k in self.levels:
            sel = self.k == k
            (a, b), (c, d), (e, f) = lattice.rect_bounds(k, self.ix[sel], self.it[sel])
            sm_lo.append(a); sm_hi.append(b); sp_lo.append(c); sp_hi.append(d)
            rp_lo.append(e); rp_hi.append(f)
        cat = np.concatenate
        self.sm = (cat(sm_lo), cat(sm_hi))
        self.sp = (cat(sp_lo), cat(sp_hi))
        self.rp = (cat(rp_lo), cat(rp_hi))
        self.sm_cells = snap_bounds(grid, *self.sm)
        self.sp_cells = snap_bounds(grid, *self.sp)
        self.rp_cells = snap_bounds(grid, *self.rp)
        self.sp_volume = np.prod(self.sp[1] - self.sp[0], axis=1)
        self.rp_volume = np.prod(self.rp[1] - self.rp[0], axis=1)

    def __len__(self):
        return len(self.k)

    def values(self, agg: PrefixAggregate, alpha: float) -> np.ndarray:
        """``|S^+|^alpha * average over S^+``; 0 where S^+ holds no cell center."""
        a, b = self.sp_cells
        counts = np.prod(b - a, axis=1)
        sums = agg.range_sums(a, b)
        vol = counts * self.grid.cell_volume
        with np.errstate(invalid="ignore", divide="ignore"):
            avg = np.where(counts > 0, sums / np.where(counts > 0, vol, 1.0), 0.0)
        if alpha:
            avg = avg * self.sp_volume ** alpha
        return avg

    def lower_nonempty(self) -> np.ndarray:
        a, b = self.sm_cells
        ext = np.asarray(self.grid.extents)
        return np.all(np.minimum(b, ext) > np.maximum(a, 0), axis=1)

    def slices(self, i: int, which: str = "sm") -> tuple:
        a, b = getattr(self, which + "_cells")
        ext = self.grid.extents
        return tuple(slice(min(max(x, 0), e), min(max(y, 0), e))
                     for x, y, e in zip(a[i], b[i], ext))

    def rect(self, i: int) -> DyadicRect:
        return self.lattice.rect(int(self.k[i]), self.ix[i], int(self.it[i]))


def dyadic_maximal(f: Field, lattice: DyadicLattice, alpha: float = 0.0,
                   pieces: DyadicPieces | None = None) -> Field:
    """``sup over S with (x,t) in S^- of |S^+|^alpha * average of |f| over S^+``."""
    if pieces is None:
        pieces = DyadicPieces(lattice, f.grid)
    agg = PrefixAggregate(f.grid, np.abs(f.values))
    vals = pieces.values(agg, alpha)
    out = np.zeros(f.grid.extents)
    for i in np.flatnonzero(pieces.lower_nonempty() & (vals > 0)):
        sl = pieces.slices(i)
        np.maximum(out[sl], vals[i], out=out[sl])
    return Field(f.grid, out, f"Md({f.name})")


def domination_levels(scales, k_floor: int | None = None) -> tuple:
    """Lattice level range covering ``8L <= 2^-k < 32L`` for every scale."""
    ks = [k for L in scales for k in (math.floor(-math.log2(8 * L)), math.floor(-math.log2(8 * L)) - 1)]
    return min(ks), max(ks)


def domination_check(f: Field, params: Params, scales, family: Sequence[DyadicLattice],
                     pieces: list | None = None, centered_values=None) -> VerificationReport:
    """Pointwise ``(M_c f)^r <= C1^r * sum_iota (M_d,iota f)^r`` with ``C1 = 2^((1-a)(5n+5p-1))``."""
    from .maximal import FORWARD, maximal_field

    n, p, a, r = params.n, params.p, params.alpha, params.r
    C1 = 2.0 ** ((1 - a) * (5 * n + 5 * p - 1))
    if centered_values is None:
        centered_values = maximal_field(f, FORWARD, True, Params(n=n, p=p, gamma=0.0, alpha=a,
                                                                 q=params.q, r=params.r),
                                        scales).values
    total = np.zeros(f.grid.extents)
    for i, lat in enumerate(family):
        pc = None if pieces is None else pieces[i]
        total += dyadic_maximal(f, lat, a, pc).values ** r
    lhs = centered_values ** r
    rhs = C1 ** r * total
    slack = 1e-9
    # prefix-sum residue leaves ~1e-19 where the true average is 0
    floor = (1e-12 * float(np.abs(f.values).max(initial=0.0))) ** r
    bad = lhs > rhs * (1 + slack) + floor
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1), np.where(lhs > 0, np.inf, 0.0))
    ratio = np.where(lhs > floor, ratio, 0.0)
    worst = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    rep = VerificationReport(
        theorem="domination", lhs=float(lhs[worst]), rhs=float(total[worst]),
        paper_constant=C1 ** r, slack=slack,
        meta={"n": n, "p": p, "alpha": a, "r": r, "lattices": len(family),
              "worst_cell": [int(i) for i in worst]},
        checks={"no_violations": not bool(bad.any())})
    rep.meta["violations"] = [list(map(int, c)) for c in np.argwhere(bad)[:20]]
    return rep


def lattice_for_grid(grid: Grid, p: float, spatial_shift=0, time_root_offset: float = 0.0,
                     k_min: int | None = None) -> DyadicLattice:
    """Lattice whose finest level still has S^- and S^+ at least one cell thick.

    ``k_min`` defaults to the level whose cubes span the largest spatial edge.
    """
    edges = grid.domain.edges
    if k_min is None:
        k_min = math.floor(-math.log2(max(edges[:-1])) + 1e-12)
    hx = max(grid.spacing[:-1])
    ht = grid.spacing[-1]
    probe = DyadicLattice(grid.n, p, k_min, k_min + 60)
    k_max = k_min
    while k_max + 1 <= probe.k_max and 2.0 ** (-(k_max + 1)) >= hx * (1 - 1e-12) \
            and probe.time_length(k_max + 1) >= ht * (1 - 1e-12):
        k_max += 1
    return build_lattice(grid.domain, k_min, k_max, p, spatial_shift, time_root_offset)
