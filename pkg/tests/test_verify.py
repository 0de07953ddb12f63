import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parweight.field import Field, Grid
from parweight.geometry import ParameterError, Params
from parweight.lattice import DyadicPieces, build_family, domination_levels, lattice_for_grid
from parweight.maximal import ScaleFamily
from parweight.synth import random_trial
from parweight.verify import (cz_decompose, cz_levels, distribution_sup, dyadic_ladder,
                              interpolation_constant, linearize, sawyer_intermediate,
                              verify_fefferman_stein, verify_sawyer, verify_strong_bump,
                              verify_weak_type, weak_constant_C2, weak_type_multiplier)
from parweight.weights import WeightPair

G16 = Grid.unit(1, 16)


def trial(grid, seed, t=0):
    f, w, v = random_trial(grid, seed, t)
    return f, WeightPair(w, v)


def unit_pair(grid):
    return WeightPair(Field.constant(grid, 1.0, "w"), Field.constant(grid, 1.0, "v"))


def test_weak_type_constants():
    assert weak_constant_C2(1, 1.0, 0.0, 0.0) == 2.0 ** 26
    assert weak_type_multiplier(Params(q=2, r=2)) == 2.0 ** 29
    assert weak_type_multiplier(Params(q=1, r=1)) == 4 * 2.0 ** 26
    assert weak_type_multiplier(Params(q=2, r=4, alpha=0.25)) == \
        2.0 ** 5 * (2.0 ** (9 + 3 + 13 + 4 / 3)) ** 2


def test_zero_function_passes_weak_type():
    f, pair = trial(G16, 0)
    rep = verify_weak_type(Field.constant(G16, 0.0), pair, Params(q=2, r=2))
    assert rep.lhs == 0.0 and rep.passed


def test_weak_type_rejects_mismatched_exponents():
    f, pair = trial(G16, 0)
    with pytest.raises(ParameterError):
        verify_weak_type(f, pair, Params(q=2, r=3))


@pytest.mark.parametrize("q,r,alpha,gamma", [(2, 2, 0, 0), (1, 1, 0, 0.5), (2, 4, 0.25, 0.5)])
def test_weak_type_trials(q, r, alpha, gamma):
    P = Params(q=q, r=r, alpha=alpha, gamma=gamma)
    for t in range(5):
        f, pair = trial(Grid.unit(1, 32), 3, t)
        rep = verify_weak_type(f, pair, P)
        assert rep.passed, rep.line()
        assert rep.meta["exact_sup"] >= rep.lhs * (1 - 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1, 4))
def test_distribution_supremum_against_a_dense_scan(seed, r):
    rng = np.random.default_rng(seed)
    g = Grid.unit(1, 6)
    M = rng.exponential(size=g.extents) * (rng.random(g.extents) < 0.8)
    M[0, 0] = M[1, 1]       # ties
    wr = rng.exponential(size=g.extents)
    exact = distribution_sup(M, wr, r, g)
    vals = np.unique(M[M > 0])
    probes = np.concatenate([vals, vals * (1 - 1e-12), (vals[:-1] + vals[1:]) / 2])
    scan = max(lam ** r * wr[M > lam].sum() * g.cell_volume for lam in probes)
    assert exact == pytest.approx(scan, rel=1e-9)
    ladder = distribution_sup(M, wr, r, g, dyadic_ladder(M))
    assert ladder <= exact * (1 + 1e-12)
    assert ladder * 2 ** r >= exact * (1 - 1e-12)


def test_fefferman_stein_with_unit_weight():
    f, _ = trial(Grid.unit(1, 32), 1)
    rep = verify_fefferman_stein(f, Field.constant(f.grid, 1.0, "w"), 2.0, 0.0)
    assert rep.passed
    assert rep.meta["A11"] <= 1 + 1e-12
    assert rep.paper_constant == 16 * rep.meta["C1"]


@pytest.mark.parametrize("gamma", [0.0, 0.5])
def test_fefferman_stein_trials(gamma):
    for t in range(4):
        f, pair = trial(Grid.unit(1, 32), 2, t)
        rep = verify_fefferman_stein(f, pair.w, 2.0, gamma)
        assert rep.passed, rep.line()


def test_strong_bump_multiplier_and_unit_weights():
    f, _ = trial(Grid.unit(1, 32), 4)
    rep = verify_strong_bump(f, unit_pair(f.grid), 3.0, 2.0, 0.0)
    assert rep.meta["bump_constant"] == pytest.approx(1.0)
    assert rep.meta["t"] == 2.0
    assert rep.paper_constant == pytest.approx(24 * rep.meta["C"])
    assert rep.passed


def test_strong_bump_trials():
    for t in range(4):
        f, pair = trial(Grid.unit(1, 32), 5, t)
        assert verify_strong_bump(f, pair, 3.0, 2.0, 0.5).passed


def test_cz_on_the_zero_field():
    lat = lattice_for_grid(G16, 1.0)
    zero = Field.constant(G16, 0.0)
    assert cz_levels(zero, lat, 0.0) == []
    lev = cz_decompose(zero, lat, 0.0, 0)
    assert len(lev) == 0 and not lev.level_set.any()


def test_cz_selects_the_cell_or_an_ancestor():
    lat = lattice_for_grid(G16, 1.0)
    target = lat.children(lat.rect(2, [1], 3))[-1]
    v = np.zeros(G16.extents)
    v[target.spatial_index[0] * 2:(target.spatial_index[0] + 1) * 2, target.time_index] = 1.0
    f = Field(G16, v)
    pieces = DyadicPieces(lat, G16)
    lev = cz_decompose(f, lat, 0.0, -3, pieces)
    assert lev.exact and lev.disjoint and lev.averages_ok
    chosen = [pieces.rect(int(i)) for i in lev.indices]
    under = lat.rect(3, target.spatial_index, target.time_index - 1)
    assert any(S.s_minus.contains_box(under.s_minus) for S in chosen)


@pytest.mark.parametrize("seed", range(3))
def test_cz_levels_nest(seed):
    f, _ = trial(G16, seed)
    lat = lattice_for_grid(G16, 1.0)
    pieces = DyadicPieces(lat, G16)
    levels = cz_levels(f, lat, 0.0, pieces)
    assert levels
    for lev in levels:
        assert lev.exact and lev.disjoint and lev.averages_ok
    for a, b in zip(levels, levels[1:]):
        for i in b.indices:
            assert a.union[pieces.slices(int(i))].all()


def test_linearized_operator_properties():
    f, pair = trial(G16, 6)
    lat = lattice_for_grid(G16, 1.0)
    lin = linearize(f, pair, 2.0, 2.0, 0.0, lat)
    sigma = Field(G16, 1.0 / pair.v.values, "sigma")
    one = lin.T(Field.constant(G16, 1.0), sigma)
    assert np.all(one <= 1 + 1e-12)
    P = lin.pieces
    a, b = P.sp_cells
    i = 0
    sl = P.slices(int(lin.rect[i]), "sp")
    direct = (sigma.values[sl]).sum() * G16.cell_volume / lin.sigma_R[i]
    assert one[i] == pytest.approx(direct, rel=1e-12)
    g = Field(G16, np.abs(f.values) / sigma.values)
    assert np.nanmax(lin.T(g, sigma)) <= np.abs(g.values).max() * (1 + 1e-12)
    # mu adds up over any subset
    idx = np.random.default_rng(0).random(len(lin.mu)) < 0.5
    assert lin.mu[idx].sum() + lin.mu[~idx].sum() == pytest.approx(lin.mu.sum(), rel=1e-12)
    # the F sets are disjoint and lie in their S^- pieces
    count = sum(F.astype(int) for F in lin.F)
    assert count.max() <= 1


@pytest.mark.parametrize("seed", range(3))
def test_sawyer_intermediate_and_endpoints(seed):
    f, pair = trial(G16, seed)
    lat = lattice_for_grid(G16, 1.0)
    res = sawyer_intermediate(f, pair, 2.0, 2.0, 0.0, lat)
    assert res["intermediate_ok"] and res["linf_ok"] and res["weak"]["ok"]
    assert res["cz_ok"] and res["F_disjoint"]


def test_sawyer_zero_function_and_unit_weights():
    lat = lattice_for_grid(G16, 1.0)
    rep = verify_sawyer(Field.constant(G16, 0.0), unit_pair(G16), 2.0, 2.0, 0.0, lat)
    assert rep.passed and rep.lhs == 0.0
    f, _ = trial(G16, 9)
    rep = verify_sawyer(f, unit_pair(G16), 2.0, 2.0, 0.0, lat)
    assert rep.passed
    assert rep.paper_constant == pytest.approx((8 * interpolation_constant(2, 2) * rep.meta["S"]) ** 2)
    assert 0 < rep.ratio <= rep.paper_constant


def test_sawyer_off_diagonal_reports_without_asserting_the_strong_bound():
    f, pair = trial(G16, 10)
    lat = lattice_for_grid(G16, 1.0)
    rep = verify_sawyer(f, pair, 2.0, 3.0, 0.0, lat)
    assert math.isinf(rep.paper_constant)
    assert "interpolation-constant-dependent" in rep.note
    assert rep.passed


def test_sawyer_with_lag_is_skipped():
    f, pair = trial(G16, 11)
    rep = verify_sawyer(f, pair, 2.0, 2.0, 0.0, lattice_for_grid(G16, 1.0), gamma=0.5)
    assert rep.skipped and rep.passed


def test_sawyer_centered_route():
    f, pair = trial(G16, 12)
    scales = ScaleFamily.default(G16, 1.0)
    fam = build_family(G16.domain, *domination_levels(scales.scales), 1.0)
    rep = verify_sawyer(f, pair, 2.0, 2.0, 0.0, lattice_for_grid(G16, 1.0),
                        centered_family=fam, scales=scales)
    assert rep.checks["centered_route"] and rep.passed
