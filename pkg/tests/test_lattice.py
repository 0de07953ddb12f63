import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from parweight.field import Field, Grid
from parweight.geometry import Box, ParabolicRectangle, ParameterError, Params
from parweight.lattice import (DyadicPieces, NoParentError, build_family, build_lattice,
                               cover_bounds_hold, domination_check, dyadic_maximal, family_size,
                               find_cover, lattice_for_grid, parent, split_counts,
                               widened_nesting_check)
from parweight.maximal import ScaleFamily


def test_p1_lengths_are_exact_halvings():
    lat = build_lattice(None, 0, 12, 1.0, n=1)
    assert lat.time_length_exact(0) == Fraction(1, 2)
    for k in lat.levels:
        assert lat.time_length_exact(k) == Fraction(1, 2 ** (k + 1))
        if k > 0:
            assert lat.split(k) == 2


def test_p2_splits_into_four():
    lat = build_lattice(None, 0, 8, 2.0, n=1)
    for k in lat.levels:
        assert lat.time_length_exact(k) == Fraction(1, 2 ** (2 * k + 1))
        if k > 0:
            assert lat.split(k) == 4


@pytest.mark.parametrize("p", [1.5, math.e, 1.3, 2.7])
def test_two_branch_rule_matches_straight_line_simulation(p):
    lat = build_lattice(None, 0, 12, p, n=1)
    sim = oracles.time_lengths(p, 0, 12)
    assert split_counts(p) == (math.floor(2 ** p), math.ceil(2 ** p))
    for k in range(13):
        assert lat.time_length(k) == pytest.approx(sim[k], rel=1e-12)
        assert 2 ** (-p * k - 2) * (1 - 1e-12) <= sim[k] <= 2 ** (-p * k - 1) * (1 + 1e-12)
    assert not lat.sidelength_violations()


def test_negative_coarse_levels():
    lat = build_lattice(None, -3, 5, 1.5, n=2)
    assert lat.time_length(-3) == pytest.approx(2 ** (4.5 - 1))
    assert not lat.sidelength_violations()


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
@pytest.mark.parametrize("n", [1, 2])
def test_parent_round_trip_and_shared_parent(p, n):
    for shift in range(3 ** n):
        lat = build_lattice(None, 0, 5, p, shift, 0.0123, n=n)
        S = lat.rect(2, [1] * n, 3)
        kids = lat.children(S)
        assert len(kids) == 2 ** n * lat.split(3)
        for c in kids:
            assert parent(lat, c) == S
            assert S.s_minus.contains_box(c.s_minus, tol=1e-12)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, math.e])
def test_random_rectangles_sit_in_their_parents(p):
    rng = np.random.default_rng(7)
    lat = build_lattice(None, 0, 9, p, 1, 0.037, n=1)
    for _ in range(1000):
        k = int(rng.integers(1, 10))
        S = lat.rect(k, [int(rng.integers(-50, 50))], int(rng.integers(-200, 200)))
        P = parent(lat, S)
        assert P.level == k - 1
        assert P.s_minus.contains_box(S.s_minus, tol=1e-12)
        # the child's own cell is found again from its center
        assert lat.cell_of(k, S.s_minus.center) == (S.spatial_index, S.time_index)


def test_no_parent_above_the_coarsest_level():
    lat = build_lattice(None, 0, 3, 1.0, n=1)
    with pytest.raises(NoParentError):
        parent(lat, lat.rect(0, [0], 0))
    assert lat.children(lat.rect(3, [0], 0)) == []


def test_widened_nesting_examples():
    assert widened_nesting_check(build_lattice(None, 0, 4, 1.0, n=1))
    assert widened_nesting_check(build_lattice(None, 0, 6, 1.5, n=1))
    assert widened_nesting_check(build_lattice(None, 2, 2, 1.5, n=1))


@settings(max_examples=30, deadline=None)
@given(st.floats(1, 3), st.integers(1, 2), st.integers(-2, 2), st.floats(0, 1))
def test_widened_nesting_for_any_lattice(p, n, k_min, offset):
    shift = int(offset * 3 ** n) % 3 ** n
    lat = build_lattice(Box([0.0] * (n + 1), [1.0] * (n + 1)), k_min, k_min + 6, p, shift,
                        offset * 2.0 ** (-k_min * p - 1), n=n)
    assert not lat.sidelength_violations()
    assert widened_nesting_check(lat)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_partition_of_the_grid(p):
    g = Grid.unit(1, 16)
    lat = lattice_for_grid(g, p, spatial_shift=2, time_root_offset=0.01)
    pieces = DyadicPieces(lat, g)
    for k in lat.levels:
        count = np.zeros(g.extents, dtype=int)
        for i in np.flatnonzero(pieces.k == k):
            count[pieces.slices(int(i))] += 1
        assert np.all(count == 1)


def test_family_sizes_and_members():
    assert family_size(1, 1.0) == 96
    assert family_size(2, 1.0) == 288
    fam = build_family(None, 0, 6, 1.0, n=1)
    assert len(fam) == 96
    assert len(build_family(None, 0, 3, 1.0, n=2)) == 288
    labels = {(lat.spatial_shift, lat.time_root_offset) for lat in fam}
    assert len(labels) == 96
    for lat in fam:
        assert not lat.sidelength_violations()
    assert math.gcd(fam.time_denominator, 2) == 1


def test_aligned_query_finds_the_companion_cell():
    fam = build_family(Box([0.0, 0.0], [1.0, 1.0]), 0, 8, 1.0)
    lat = fam[0]
    k = 3
    S = lat.rect(k, [2], 3)
    L = 2.0 ** (-k) / 16
    # R^+ sits in the middle of S^+, z(R^-) in S^-
    cx = S.s_plus.center[0]
    R = ParabolicRectangle([cx], S.s_plus.lo[-1] + L ** 1.0 * 0.75, L, 1.0)
    hit = find_cover(R, fam)
    assert hit is not None
    ident, T = hit
    assert all(cover_bounds_hold(R, T).values())


def test_query_too_large_for_the_domain():
    fam = build_family(Box([0.0, 0.0], [1.0, 1.0]), 0, 8, 1.0)
    assert find_cover(ParabolicRectangle([0.5], 0.5, 2.0, 1.0), fam) is None


def test_constant_field_has_unit_dyadic_maximal_inside():
    g = Grid.unit(1, 16)
    lat = lattice_for_grid(g, 1.0)
    M = dyadic_maximal(Field.constant(g, 1.0), lat).values
    assert np.allclose(M[:, :8], 1.0)
    assert M.max() <= 1 + 1e-12


def test_indicator_of_a_finest_upper_cell():
    g = Grid.unit(1, 16)
    lat = lattice_for_grid(g, 1.0)
    assert (lat.k_min, lat.k_max) == (0, 3)
    P = lat.rect(2, [1], 2)
    kids = lat.children(lat.rect(2, [1], 3))
    target = kids[-1]      # top time slice of the parent's S^+
    v = np.zeros(g.extents)
    for c in oracles.cells_in(g, target.s_minus.lo, target.s_minus.hi):
        v[c] = 1.0
    M = dyadic_maximal(Field(g, v), lat).values
    under = lat.rect(3, target.spatial_index, target.time_index - 1)
    for c in oracles.cells_in(g, under.s_minus.lo, under.s_minus.hi):
        assert M[c] == pytest.approx(1.0)
    for c in oracles.cells_in(g, P.s_minus.lo, P.s_minus.hi):
        assert M[c] == pytest.approx(1 / len(kids))


@pytest.mark.parametrize("p,alpha,shift", [(1.0, 0.0, 0), (1.0, 0.3, 2), (2.0, 0.0, 1),
                                           (1.5, 0.2, 1)])
def test_dyadic_maximal_matches_enumeration(p, alpha, shift):
    g = Grid.unit(1, 16)
    lat = lattice_for_grid(g, p, shift, 0.0625 / 3)
    f = np.random.default_rng(19).normal(size=g.extents)
    got = dyadic_maximal(Field(g, f), lat, alpha).values
    np.testing.assert_allclose(got, oracles.dyadic_field(f, g, lat, alpha), rtol=1e-12, atol=1e-15)


def test_domination_constant_and_zero_field():
    g = Grid.unit(1, 16)
    scales = ScaleFamily.default(g, 1.0)
    fam = build_family(g.domain, -3, 1, 1.0)
    rep = domination_check(Field.constant(g, 0.0), Params(r=1.0, q=1.0), scales, fam)
    assert rep.paper_constant == 512.0
    assert rep.passed and rep.lhs == 0.0


def test_dump_format():
    lat = build_lattice(None, 0, 1, 1.0, n=1)
    lines = lat.dump_lines(Box([0.0, 0.0], [1.0, 1.0]))
    # level 0: 1 x 2 cells; level 1: 2 x 4 cells
    assert len(lines) == 2 + 8
    cols = lines[0].split("\t")
    assert len(cols) == 1 + 1 + 1 + 2 * 2
    assert cols[:3] == ["0", "0", "0"]
    assert [float(x) for x in cols[3:]] == [0.0, 0.0, 1.0, 0.5]


def test_lattice_for_grid_levels():
    lat = lattice_for_grid(Grid.unit(1, 16), 1.0)
    assert (lat.k_min, lat.k_max) == (0, 3)
    lat2 = lattice_for_grid(Grid.unit(1, 32), 1.0)
    assert lat2.k_max == 4


def test_invalid_lattices():
    with pytest.raises(ParameterError):
        build_lattice(None, 3, 2, 1.0, n=1)
    with pytest.raises(ParameterError):
        build_lattice(None, 0, 2, 1.0, spatial_shift=(3,), n=1)
    with pytest.raises(ParameterError):
        build_lattice(None, 0, 2, 0.5, n=1)
    with pytest.raises(ParameterError):
        build_lattice(None, 0, 2, 1.0, spatial_shift=9, n=2)
