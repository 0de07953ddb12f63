import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from parweight.field import (CellRange, DegenerateBoxError, Field, FieldFormatError, Grid,
                             PrefixAggregate, box_average, read_field, snap_box, weighted_measure,
                             write_field)
from parweight.geometry import Box, ParameterError


def random_box(rng, grid, spill=0.3):
    lo, hi = [], []
    for a in range(grid.dim):
        o = grid.origin[a]
        span = grid.spacing[a] * grid.extents[a]
        x, y = sorted(rng.uniform(o - spill * span, o + (1 + spill) * span, 2))
        lo.append(x)
        hi.append(y)
    return Box(lo, hi)


@st.composite
def grids(draw, max_dim=3):
    dim = draw(st.integers(2, max_dim))
    ext = [draw(st.integers(1, 9)) for _ in range(dim)]
    h = [draw(st.sampled_from([0.1, 0.125, 0.3, 1.0])) for _ in range(dim)]
    o = [draw(st.floats(-2, 2)) for _ in range(dim)]
    return Grid(o, h, ext)


def test_whole_domain_snaps_to_full_range():
    g = Grid.unit(1, 8)
    assert snap_box(g, g.domain) == CellRange((0, 0), (8, 8))


def test_box_inside_one_cell_snaps_to_it():
    g = Grid.unit(1, 8)
    c = g.center_of((3, 5))
    r = snap_box(g, Box([c[0] - 0.01, c[1] - 0.01], [c[0] + 0.01, c[1] + 0.01]))
    assert r == CellRange((3, 5), (4, 6))


@settings(max_examples=60, deadline=None)
@given(grids(), st.integers(0, 2 ** 31))
def test_snapping_matches_center_scan(grid, seed):
    rng = np.random.default_rng(seed)
    for _ in range(15):
        B = random_box(rng, grid)
        r = snap_box(grid, B)
        brute = oracles.cells_in(grid, B.lo, B.hi)
        assert r.count == len(brute)
        if brute:
            assert tuple(min(c[a] for c in brute) for a in range(grid.dim)) == r.lo
            assert tuple(max(c[a] for c in brute) + 1 for a in range(grid.dim)) == r.hi


def test_snapping_at_exact_centers():
    g = Grid.unit(1, 4)
    # lower edge on a center includes it, upper edge on a center excludes it
    r = snap_box(g, Box([0.125, 0.125], [0.625, 0.625]))
    assert r == CellRange((0, 0), (2, 2))


def test_constant_field_average():
    g = Grid.unit(1, 8)
    agg = Field.constant(g, 3.5).aggregate()
    rng = np.random.default_rng(0)
    for _ in range(50):
        B = random_box(rng, g, spill=0.0)
        if snap_box(g, B).count:
            assert box_average(agg, B) == pytest.approx(3.5, rel=1e-12)


def test_single_cell_indicator_over_domain():
    g = Grid.unit(1, 8)
    v = np.zeros(g.extents)
    v[2, 6] = 1.0
    assert box_average(Field(g, v).aggregate(), g.domain) == pytest.approx(1 / 64, rel=1e-12)


def test_exterior_cells_count_in_the_normalization():
    g = Grid.unit(1, 4)
    agg = Field.constant(g, 1.0).aggregate()
    # half the box lies left of the grid, where the field is zero
    assert box_average(agg, Box([-0.5, 0.0], [0.5, 1.0])) == pytest.approx(0.5)


def test_random_boxes_against_loop_sums():
    rng = np.random.default_rng(11)
    for dim in (2, 3):
        g = Grid([0.3] * dim, [0.25] * (dim - 1) + [0.1], [7] * (dim - 1) + [9])
        vals = rng.exponential(size=g.extents)
        agg = PrefixAggregate(g, vals)
        for _ in range(200):
            B = random_box(rng, g)
            s, c = agg.box_sums(np.array(B.lo), np.array(B.hi))
            ref = oracles.box_sum(vals, g, B.lo, B.hi)
            assert float(s) == pytest.approx(ref, rel=1e-9, abs=1e-12)
            assert int(c) == len(oracles.cells_in(g, B.lo, B.hi))


def test_vectorized_averages_mark_empty_boxes():
    g = Grid.unit(1, 4)
    agg = Field.constant(g, 1.0).aggregate()
    out = agg.box_averages(np.array([[0.0, 0.0], [0.01, 0.01]]), np.array([[1.0, 1.0], [0.02, 0.02]]))
    assert out[0] == 1.0 and math.isnan(out[1])
    with pytest.raises(DegenerateBoxError):
        agg.box_average(Box([0.01, 0.01], [0.02, 0.02]))


@settings(max_examples=50, deadline=None)
@given(grids(), st.integers(0, 2 ** 31))
def test_additivity_over_a_split(grid, seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=grid.extents)
    agg = PrefixAggregate(grid, vals)
    B = random_box(rng, grid)
    axis = int(rng.integers(grid.dim))
    cut = rng.uniform(B.lo[axis], B.hi[axis])
    left_hi = list(B.hi)
    left_hi[axis] = cut
    right_lo = list(B.lo)
    right_lo[axis] = cut
    whole = agg.box_sum(B)
    parts = agg.box_sum(Box(B.lo, left_hi)) + agg.box_sum(Box(right_lo, B.hi))
    assert parts == pytest.approx(whole, rel=1e-9, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(grids(), st.integers(0, 2 ** 31))
def test_monotone_for_nonnegative_fields(grid, seed):
    rng = np.random.default_rng(seed)
    agg = PrefixAggregate(grid, rng.exponential(size=grid.extents))
    B = random_box(rng, grid)
    inner = Box([a + (b - a) * 0.25 for a, b in zip(B.lo, B.hi)],
                [a + (b - a) * 0.75 for a, b in zip(B.lo, B.hi)])
    assert agg.box_sum(inner) <= agg.box_sum(B) * (1 + 1e-12) + 1e-15


def test_prefix_sums_equal_loops_on_every_box_of_a_small_grid():
    g = Grid([0.0, 0.0, 0.0], [0.5, 0.5, 0.25], [3, 3, 4])
    vals = np.random.default_rng(3).normal(size=g.extents)
    agg = PrefixAggregate(g, vals)
    import itertools
    for a0, b0 in itertools.combinations(range(4), 2):
        for a1, b1 in itertools.combinations(range(4), 2):
            for a2, b2 in itertools.combinations(range(5), 2):
                a, b = np.array([a0, a1, a2]), np.array([b0, b1, b2])
                ref = vals[a0:b0, a1:b1, a2:b2].sum() * g.cell_volume
                assert float(agg.range_sums(a, b)) == pytest.approx(ref, abs=1e-12)


def test_infinite_cells_propagate():
    g = Grid.unit(1, 4)
    v = np.ones(g.extents)
    v[1, 1] = np.inf
    agg = PrefixAggregate(g, v)
    assert math.isinf(agg.box_sum(g.domain))
    assert agg.box_sum(Box([0.5, 0.5], [1.0, 1.0])) == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        PrefixAggregate(g, np.full(g.extents, np.nan))


def test_weighted_measure():
    g = Grid.unit(1, 5)
    rng = np.random.default_rng(4)
    vals = rng.exponential(size=g.extents)
    agg = PrefixAggregate(g, vals)
    assert weighted_measure(agg, np.zeros(g.extents, bool)) == 0.0
    ones = PrefixAggregate(g, np.ones(g.extents))
    mask = rng.random(g.extents) < 0.4
    assert weighted_measure(ones, mask) == pytest.approx(mask.sum() * g.cell_volume)
    ref = 0.0
    for i in range(5):
        for j in range(5):
            if mask[i, j]:
                ref += vals[i, j] * g.cell_volume
    assert weighted_measure(agg, mask) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ParameterError):
        weighted_measure(agg, np.zeros((2, 2), bool))


def test_parfield_round_trip(tmp_path):
    g = Grid([0.5, -1.0], [0.25, 0.1], [3, 4])
    f = Field(g, np.random.default_rng(5).normal(size=g.extents))
    path = tmp_path / "f.pf"
    write_field(f, path)
    assert path.read_text().splitlines()[0] == "parfield v1"
    back = read_field(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


@pytest.mark.parametrize("text", [
    "", "parfield v2\n", "parfield v1\n2 dims: 2 2\norigin: 0 0\nspacing: 1 1\n1\n2\n3\n",
    "parfield v1\n2 dims: 2\norigin: 0 0\nspacing: 1 1\n1\n",
    "parfield v1\nx dims: 2 2\norigin: 0 0\nspacing: 1 1\n1\n2\n3\n4\n",
])
def test_malformed_parfield(tmp_path, text):
    path = tmp_path / "bad.pf"
    path.write_text(text)
    with pytest.raises(FieldFormatError):
        read_field(path)


def test_grid_validation_and_reflection():
    with pytest.raises(ParameterError):
        Grid([0.0], [0.0], [3])
    with pytest.raises(ParameterError):
        Grid([0.0, 0.0], [1.0], [3, 3])
    g = Grid.unit(1, 4)
    f = Field(g, np.arange(16.0))
    r = f.reflect_time()
    assert r.grid.domain == Box([0.0, -1.0], [1.0, 0.0])
    assert r.values[0, 0] == f.values[0, 3]
