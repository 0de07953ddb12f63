"""Desk-scale checks of the weighted inequalities with explicit constants.

Each ``verify_*`` function runs one trial and returns a ``VerificationReport``.
Operators and constants are evaluated over the same finite rectangle family,
so every inequality is compared with the exact discrete quantities it bounds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .covering import trim_overlap_constant
from .field import Field, Grid, PrefixAggregate
from .geometry import ParameterError, Params, check_gamma
from .lattice import DyadicLattice, DyadicPieces, dyadic_maximal
from .maximal import (BACKWARD, FORWARD, RectFamily, ScaleFamily, family_maximal)
from .reports import VerificationReport
from .weights import (WeightPair, a_1r_constant, bump_constant, bump_exponent, default_family,
                      muckenhoupt_constant, sawyer_terms)

SLACK = 1e-9


# -- constants -----------------------------------------------------------------

def weak_constant_C2(n: int, p: float, alpha: float, gamma: float) -> float:
    return trim_overlap_constant(n, p, alpha, gamma)


def weak_type_multiplier(params: Params) -> float:
    """``2^(r+1) C2^(r/q)`` for q > 1 and ``2^(r+1) C2^r`` for q = 1."""
    C2 = weak_constant_C2(params.n, params.p, params.alpha, params.gamma)
    e = params.r if params.q == 1 else params.r / params.q
    return 2.0 ** (params.r + 1) * C2 ** e


def interpolation_constant(q: float, r: float) -> float | None:
    """Default strong-type constant from the weak (1, r/q) and the L-infinity bounds.

    Only the diagonal case has a closed form here: ``2 (q/(q-1))^(1/q)``.
    """
    if q == r:
        return 2.0 * (q / (q - 1)) ** (1 / q)
    return None


# -- level sets and the weak-type check ----------------------------------------

def _integral(values, weight, grid: Grid) -> float:
    return float(np.sum(np.asarray(values) * np.asarray(weight)) * grid.cell_volume)


def dyadic_ladder(M: np.ndarray) -> np.ndarray:
    pos = M[M > 0]
    if len(pos) == 0:
        return np.zeros(0)
    j0 = math.floor(math.log2(pos.min())) - 1
    j1 = math.floor(math.log2(pos.max())) + 1
    return 2.0 ** np.arange(j0, j1 + 1)


def distribution_sup(M: np.ndarray, wr: np.ndarray, r: float, grid: Grid, lams=None) -> float:
    """``sup_lam lam^r wr({M > lam})``, over ``lams`` or exactly over all ``lam > 0``."""
    Mf = M.ravel()
    wf = wr.ravel() * grid.cell_volume
    if lams is None:
        # the supremum is approached as lam increases to a value of M
        order = np.argsort(-Mf, kind="stable")
        m = Mf[order]
        cum = np.cumsum(wf[order])
        # mass of {M >= m_i}: include ties
        last = np.searchsorted(-m, -m, side="right") - 1
        vals = m ** r * cum[last]
        vals = vals[m > 0]
        return float(vals.max(initial=0.0))
    best = 0.0
    for lam in lams:
        best = max(best, lam ** r * float(wf[Mf > lam].sum()))
    return best


def operator_family(grid: Grid, params: Params, scales: ScaleFamily | None) -> RectFamily:
    return default_family(grid, params.p, params.gamma, scales)


def verify_weak_type(f: Field, pair: WeightPair, params: Params, scales: ScaleFamily | None = None,
                     family: RectFamily | None = None, slack: float = SLACK, meta=None) -> VerificationReport:
    """``lam^r w^r({M f > lam}) <= 2^(r+1) C2^(r/q) [w,v]^r (int |f|^q v^q)^(r/q)`` on a dyadic ladder."""
    params.check_weak_type()
    grid = f.grid
    fam = family if family is not None else operator_family(grid, params, scales)
    M = family_maximal(f, fam, params.gamma, params.alpha, FORWARD, centered=True)
    const = muckenhoupt_constant(pair, params, params.gamma, fam)
    q, r = params.q, params.r
    wr = np.asarray(pair.w.values) ** r
    lams = dyadic_ladder(M)
    lhs = distribution_sup(M, wr, r, grid, lams)
    exact = distribution_sup(M, wr, r, grid)
    norm = _integral(np.abs(f.values) ** q, np.asarray(pair.v.values) ** q, grid)
    meta = dict(meta or {})
    meta.update({"q": q, "r": r, "alpha": params.alpha, "gamma": params.gamma, "n": params.n,
                 "p": params.p, "grid": list(grid.extents), "family_size": len(fam),
                 "weight_constant": const.value, "exact_sup": exact})
    C = weak_type_multiplier(params)
    if not math.isfinite(const.value):
        return VerificationReport("weak", lhs, math.inf, C, slack, meta, skipped=True,
                                  note="infinite weight constant; trial skipped")
    rhs = const.value ** r * norm ** (r / q)
    checks = {"exact_sup_bound": exact <= C * rhs * (1 + slack),
              "ladder_within_2^r": bool(lhs * 2.0 ** r >= exact * (1 - slack))}
    return VerificationReport("weak", lhs, rhs, C, slack, meta, checks)


# -- Fefferman-Stein -------------------------------------------------------------

def verify_fefferman_stein(f: Field, w: Field, q: float, gamma: float,
                           scales: ScaleFamily | None = None, p: float = 1.0,
                           family: RectFamily | None = None, slack: float = SLACK,
                           meta=None) -> VerificationReport:
    """Weak and strong inequalities for the pair ``(w, M^- w)``.

    ``M^- w`` is the uncentered backward operator over the same family as the
    centered forward operator on the left, which makes the pair's (1,1) constant
    ``A`` at most 1.  Weak multiplier ``C1 = 4 C2 A``; strong ``q 2^(q+1) C1/(q-1)``.
    """
    check_gamma(gamma)
    if q <= 1:
        raise ParameterError(f"strong form needs q > 1, got {q}")
    grid = f.grid
    n = grid.n
    fam = family if family is not None else default_family(grid, p, gamma, scales)
    Mf = family_maximal(f, fam, gamma, 0.0, FORWARD, centered=True)
    Mw = family_maximal(w, fam, gamma, 0.0, BACKWARD, centered=False)
    pair = WeightPair(w, Field(grid, Mw, "Mw"))
    A = a_1r_constant(pair, 1.0, gamma, fam).value
    C1 = 4.0 * weak_constant_C2(n, p, 0.0, gamma) * A
    absf = np.abs(f.values)
    weak_lhs = distribution_sup(Mf, np.asarray(w.values), 1.0, grid)
    weak_rhs = _integral(absf, Mw, grid)
    strong_lhs = _integral(Mf ** q, w.values, grid)
    strong_rhs = _integral(absf ** q, Mw, grid)
    mult = q * 2.0 ** (q + 1) * C1 / (q - 1)
    meta = dict(meta or {})
    meta.update({"q": q, "gamma": gamma, "n": n, "p": p, "grid": list(grid.extents),
                 "A11": A, "C1": C1, "weak_lhs": weak_lhs, "weak_rhs": weak_rhs,
                 "weak_ratio": (weak_lhs / weak_rhs) if weak_rhs > 0 else 0.0})
    checks = {"weak": weak_lhs <= C1 * weak_rhs * (1 + slack), "A11_at_most_1": A <= 1 + slack}
    return VerificationReport("fs", strong_lhs, strong_rhs, mult, slack, meta, checks)


# -- strong bump -----------------------------------------------------------------

def verify_strong_bump(f: Field, pair: WeightPair, q: float, s: float, gamma: float,
                       scales: ScaleFamily | None = None, p: float = 1.0,
                       family: RectFamily | None = None, slack: float = SLACK,
                       meta=None) -> VerificationReport:
    """``int (M f)^q w <= (q/(q-1)) (s/(s-1)) 2^q C [w,v]_bump int |f|^q v``.

    ``C = 2^(t+1) C2`` is the weak-type multiplier at the diagonal exponent ``t``,
    ``t - 1 = (q - 1)/s``.
    """
    check_gamma(gamma)
    grid = f.grid
    n = grid.n
    fam = family if family is not None else default_family(grid, p, gamma, scales)
    t = bump_exponent(q, s)
    C = 2.0 ** (t + 1) * weak_constant_C2(n, p, 0.0, gamma)
    b = bump_constant(pair, q, s, gamma, fam).value
    mult = (q / (q - 1)) * (s / (s - 1)) * 2.0 ** q * C
    meta = dict(meta or {})
    meta.update({"q": q, "s": s, "t": t, "gamma": gamma, "n": n, "p": p,
                 "grid": list(grid.extents), "bump_constant": b, "C": C})
    Mf = family_maximal(f, fam, gamma, 0.0, FORWARD, centered=True)
    lhs = _integral(Mf ** q, pair.w.values, grid)
    norm = _integral(np.abs(f.values) ** q, pair.v.values, grid)
    if not math.isfinite(b):
        return VerificationReport("bump", lhs, math.inf, mult, slack, meta, skipped=True,
                                  note="infinite bump constant; trial skipped")
    return VerificationReport("bump", lhs, b * norm, mult, slack, meta)


# -- Calderon-Zygmund decomposition and the linearized operator -----------------

@dataclass
class CZLevel:
    """Maximal dyadic rectangles with ``|S^+|^alpha avg_{S^+} |f| > 2^k``."""

    k: int
    indices: np.ndarray
    level_set: np.ndarray
    union: np.ndarray
    cover_count: np.ndarray
    values: np.ndarray

    @property
    def threshold(self) -> float:
        return 2.0 ** self.k

    @property
    def exact(self) -> bool:
        return bool(np.array_equal(self.level_set, self.union))

    @property
    def disjoint(self) -> bool:
        return int(self.cover_count.max(initial=0)) <= 1

    @property
    def averages_ok(self) -> bool:
        return bool(np.all(self.values > self.threshold))

    def __len__(self):
        return len(self.indices)


class _Keys:
    def __init__(self, pieces: DyadicPieces):
        self.pieces = pieces
        self.index = {self.key(i): i for i in range(len(pieces))}

    def key(self, i):
        P = self.pieces
        return (int(P.k[i]), tuple(int(x) for x in P.ix[i]), int(P.it[i]))

    def ancestors(self, i):
        P = self.pieces
        lat = P.lattice
        k, ix, it = int(P.k[i]), np.asarray(P.ix[i]), int(P.it[i])
        while k > lat.k_min:
            ix, it = lat.parent_index(k, ix, it)
            k -= 1
            yield (k, tuple(int(x) for x in ix), int(it))


def cz_decompose(f: Field, lattice: DyadicLattice, alpha: float, k: int,
                 pieces: DyadicPieces | None = None, M: np.ndarray | None = None) -> CZLevel:
    """Level-``k`` piece: maximal lattice rectangles whose value exceeds ``2^k``."""
    if pieces is None:
        pieces = DyadicPieces(lattice, f.grid)
    agg = PrefixAggregate(f.grid, np.abs(f.values))
    vals = pieces.values(agg, alpha)
    if M is None:
        M = dyadic_maximal(f, lattice, alpha, pieces).values
    thr = 2.0 ** k
    cand = np.flatnonzero(pieces.lower_nonempty() & (vals > thr))
    keys = _Keys(pieces)
    cset = {keys.key(i) for i in cand}
    chosen = [i for i in cand if not any(a in cset for a in keys.ancestors(i))]
    count = np.zeros(f.grid.extents, dtype=np.int64)
    for i in chosen:
        count[pieces.slices(i)] += 1
    idx = np.array(chosen, dtype=np.int64)
    return CZLevel(k, idx, M > thr, count > 0, count, vals[idx])


def cz_levels(f: Field, lattice: DyadicLattice, alpha: float, pieces: DyadicPieces | None = None,
              M: np.ndarray | None = None) -> list:
    """All levels ``k`` whose level set is nonempty, from the bottom of ``M`` to its top."""
    if pieces is None:
        pieces = DyadicPieces(lattice, f.grid)
    if M is None:
        M = dyadic_maximal(f, lattice, alpha, pieces).values
    pos = M[M > 0]
    if len(pos) == 0:
        return []
    k0 = math.floor(math.log2(pos.min())) - 1
    k1 = math.floor(math.log2(pos.max()))
    out = []
    for k in range(k0, k1 + 1):
        lev = cz_decompose(f, lattice, alpha, k, pieces, M)
        if lev.level_set.any():
            out.append(lev)
    return out


@dataclass
class Linearization:
    """Indexed pieces ``(i, k)`` of a full decomposition with their ``mu`` weights."""

    pieces: DyadicPieces
    rect: np.ndarray          # piece index per (i, k)
    level: np.ndarray         # k per (i, k)
    F: list                   # cell masks F_{i,k}
    sigma_R: np.ndarray       # sigma(R^+_{i,k})
    mu: np.ndarray
    levels: list
    M: np.ndarray

    def T(self, g: Field, sigma: Field) -> np.ndarray:
        """``T g(i,k) = sigma(R^+)^-1 int_{S^+} |g| sigma``; NaN where ``sigma(R^+) = 0``."""
        agg = PrefixAggregate(g.grid, np.abs(g.values) * np.asarray(sigma.values))
        a, b = self.pieces.sp_cells
        num = agg.range_sums(a[self.rect], b[self.rect])
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(self.sigma_R > 0, num / np.where(self.sigma_R > 0, self.sigma_R, 1), np.nan)
        if np.any(self.sigma_R <= 0):
            warnings.warn("indices with zero sigma mass skipped", RuntimeWarning, stacklevel=2)
        return out

    def widened_family(self) -> tuple:
        """Distinct widened rectangles as a ``RectFamily`` and the map from (i,k) to it."""
        P = self.pieces
        lo, hi = P.rp[0][self.rect], P.rp[1][self.rect]
        uniq, inv = np.unique(np.concatenate([lo, hi], axis=1), axis=0, return_inverse=True)
        d = lo.shape[1]
        ulo, uhi = uniq[:, :d], uniq[:, d:]
        L = uhi[:, 0] - ulo[:, 0]
        cx = (ulo[:, :-1] + uhi[:, :-1]) / 2
        ct = ulo[:, -1]
        fam = RectFamily(cx, ct, L, P.lattice.p)
        return fam, inv.reshape(-1)


def linearize(f: Field, pair: WeightPair, q: float, r: float, alpha: float,
              lattice: DyadicLattice, pieces: DyadicPieces | None = None) -> Linearization:
    grid = f.grid
    if pieces is None:
        pieces = DyadicPieces(lattice, grid)
    M = dyadic_maximal(f, lattice, alpha, pieces).values
    levels = cz_levels(f, lattice, alpha, pieces, M)
    qc = q / (q - 1)
    sigma = np.asarray(pair.v.values, dtype=float) ** (1 - qc)
    sagg = PrefixAggregate(grid, sigma)
    w = np.asarray(pair.w.values)
    rects, ks, Fs = [], [], []
    for lev in levels:
        for i in lev.indices:
            F = np.zeros(grid.extents, dtype=bool)
            F[pieces.slices(int(i))] = True
            F &= M <= 2.0 ** (lev.k + 1)
            rects.append(int(i))
            ks.append(lev.k)
            Fs.append(F)
    rects = np.array(rects, dtype=np.int64)
    a, b = pieces.rp_cells
    if len(rects):
        sR = sagg.range_sums(a[rects], b[rects])
        cnt = np.prod(b[rects] - a[rects], axis=1) * grid.cell_volume
        avg = np.where(cnt > 0, sR / np.where(cnt > 0, cnt, 1), 0.0)
        vol = pieces.rp_volume[rects]
        wF = np.array([float(w[F].sum() * grid.cell_volume) for F in Fs])
        mu = (vol ** alpha * avg) ** r * wF
    else:
        sR = np.zeros(0)
        mu = np.zeros(0)
    return Linearization(pieces, rects, np.array(ks, dtype=np.int64), Fs, sR, mu, levels, M)


def _s_plus_key(lat: DyadicLattice, k: int, ix, it):
    return (k, tuple(int(x) for x in ix), int(it) + 1)


def _s_plus_ancestors(lat: DyadicLattice, k: int, ix, it):
    """S^+ cells containing the S^+ cell of ``(k, ix, it)``, coarser levels only."""
    ix, it = np.asarray(ix), int(it) + 1
    while k > lat.k_min:
        ix, it = lat.parent_index(k, ix, it)
        k -= 1
        yield (k, tuple(int(x) for x in ix), int(it))


def weak_endpoint(lin: Linearization, Tg: np.ndarray, g_sigma_mass: float, pair: WeightPair,
                  q: float, r: float, alpha: float, lams=None, slack: float = SLACK) -> dict:
    """``sum_{Tg > lam} mu <= [S]^r (lam^-1 int |g| sigma)^(r/q)`` over a ladder of ``lam``.

    ``[S]`` is the testing constant over the widened rectangles of the
    decomposition, with the uncentered forward operator over that same family.
    Also returns the intermediate per-group bound for the maximal disjoint
    S^+ selection.
    """
    P = lin.pieces
    lat = P.lattice
    fam, inv = lin.widened_family()
    if len(fam) == 0:
        return {"ok": True, "S": 0.0, "worst_ratio": 0.0, "lams": 0}
    terms = sawyer_terms(pair, q, r, alpha, fam, fam)
    S = float(np.nanmax(terms)) if np.isfinite(terms).any() else 0.0
    if lams is None:
        vals = np.unique(Tg[np.isfinite(Tg) & (Tg > 0)])
        lams = np.concatenate([vals * (1 - 1e-9), vals[:-1] * 0.5 + vals[1:] * 0.5])
    keys = [_s_plus_key(lat, int(P.k[i]), P.ix[i], P.it[i]) for i in lin.rect]
    worst = 0.0
    ok = True
    group_ok = True
    for lam in lams:
        sel = np.flatnonzero(Tg > lam)
        if len(sel) == 0:
            continue
        lhs = float(lin.mu[sel].sum())
        rhs = S ** r * (g_sigma_mass / lam) ** (r / q)
        if lhs > rhs * (1 + slack):
            ok = False
        if rhs > 0:
            worst = max(worst, lhs / rhs)
        # group by the maximal S^+ containing each index; sum_{I_j} mu <= [S]^r sigma(R_j^+)^(r/q)
        kset = {keys[i] for i in sel}
        groups = {}
        for i in sel:
            top = keys[i]
            for anc in _s_plus_ancestors(lat, int(P.k[lin.rect[i]]), P.ix[lin.rect[i]],
                                         P.it[lin.rect[i]]):
                if anc in kset:
                    top = anc
            groups.setdefault(top, []).append(i)
        head = {keys[i]: i for i in sel}
        for top, members in groups.items():
            bound = S ** r * lin.sigma_R[head[top]] ** (r / q)
            if float(lin.mu[members].sum()) > bound * (1 + slack):
                group_ok = False
    return {"ok": ok and group_ok, "weak_ok": ok, "group_ok": group_ok, "S": S,
            "worst_ratio": worst, "lams": len(lams)}


def sawyer_intermediate(f: Field, pair: WeightPair, q: float, r: float, alpha: float,
                        lattice: DyadicLattice, pieces: DyadicPieces | None = None,
                        slack: float = SLACK) -> dict:
    """Evaluate every quantity of the dyadic Sawyer chain for one lattice."""
    grid = f.grid
    lin = linearize(f, pair, q, r, alpha, lattice, pieces)
    w = np.asarray(pair.w.values)
    lhs = _integral(lin.M ** r, w, grid)
    qc = q / (q - 1)
    sigma = Field(grid, np.asarray(pair.v.values, dtype=float) ** (1 - qc), "sigma")
    g = Field(grid, np.abs(f.values) / sigma.values, "g")
    Tg = lin.T(g, sigma)
    good = np.isfinite(Tg)
    rhs = 8.0 ** r * float(np.sum(Tg[good] ** r * lin.mu[good]))
    gmax = float(np.abs(g.values).max(initial=0.0))
    linf_ok = bool(np.all(Tg[good] <= gmax * (1 + slack)))
    g_mass = _integral(np.abs(g.values), sigma.values, grid)
    weak = weak_endpoint(lin, Tg, g_mass, pair, q, r, alpha, slack=slack)
    F_count = np.zeros(grid.extents, dtype=np.int64)
    for F in lin.F:
        F_count += F
    cz_ok = all(lev.exact and lev.disjoint and lev.averages_ok for lev in lin.levels)
    norm = _integral(np.abs(f.values) ** q, pair.v.values, grid)
    return {"lhs": lhs, "rhs": rhs, "intermediate_ok": lhs <= rhs * (1 + slack),
            "linf_ok": linf_ok, "weak": weak, "F_disjoint": int(F_count.max(initial=0)) <= 1,
            "cz_ok": cz_ok, "norm": norm, "pieces": len(lin.rect), "Tg": Tg, "lin": lin}


def verify_sawyer(f: Field, pair: WeightPair, q: float, r: float, alpha: float,
                  lattice: DyadicLattice, C2: float | None = None, gamma: float = 0.0,
                  centered_family=None, scales: ScaleFamily | None = None,
                  slack: float = SLACK, meta=None) -> VerificationReport:
    """Dyadic Sawyer chain on one lattice.

    Checks exactly: the factor-8 intermediate step, both endpoint bounds of the
    linearized operator, CZ exactness and disjointness of the ``F`` sets.  The
    strong bound ``int (M_d f)^r w <= (8 C2 [S])^r (int |f|^q v)^(r/q)`` depends on
    the interpolation constant ``C2``; without a configured or default value the
    ratio is reported but not asserted.  With ``centered_family`` (lattices on
    the same grid) the centered route is also checked through pointwise domination.
    """
    meta = dict(meta or {})
    meta.update({"q": q, "r": r, "alpha": alpha, "gamma": gamma, "grid": list(f.grid.extents),
                 "levels": [lattice.k_min, lattice.k_max]})
    if gamma > 0:
        return VerificationReport("sawyer", 0.0, 0.0, 1.0, slack, meta, skipped=True,
                                  note="characterization only established without time lag")
    res = sawyer_intermediate(f, pair, q, r, alpha, lattice, slack=slack)
    S = res["weak"]["S"]
    if C2 is None:
        C2 = interpolation_constant(q, r)
    meta.update({"S": S, "intermediate_lhs": res["lhs"], "intermediate_rhs": res["rhs"],
                 "weak_worst_ratio": res["weak"]["worst_ratio"], "pieces": res["pieces"],
                 "interpolation_constant": C2})
    checks = {"intermediate": res["intermediate_ok"], "linf": res["linf_ok"],
              "weak": res["weak"]["ok"], "cz": res["cz_ok"], "F_disjoint": res["F_disjoint"]}
    note = "interpolation-constant-dependent"
    rhs = res["norm"] ** (r / q)
    if centered_family is not None:
        from .lattice import domination_check
        params = Params(n=f.grid.n, p=lattice.p, alpha=alpha, q=q, r=r)
        dom = domination_check(f, params, scales, centered_family)
        checks["centered_route"] = dom.passed
    if C2 is None:
        return VerificationReport("sawyer", res["lhs"], rhs, math.inf, slack, meta, checks,
                                  note=note + "; strong ratio not asserted")
    return VerificationReport("sawyer", res["lhs"], rhs, (8 * C2 * S) ** r, slack, meta, checks,
                              note=note)


def verify_domination(f: Field, params: Params, scales: ScaleFamily, family,
                      meta=None) -> VerificationReport:
    from .lattice import domination_check
    rep = domination_check(f, params, scales, family)
    rep.meta.update(meta or {})
    return rep
