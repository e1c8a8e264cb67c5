import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brepmatch.errors import DuplicateId, InvalidTolerance
from brepmatch.grid import ShiftedGridIndex

coords = st.floats(-5.0, 5.0, allow_nan=False)
point = st.tuples(coords, coords, coords)


def test_one_dimensional_analogue_shares_grid_zero_cell():
    idx = ShiftedGridIndex.build([(0, (0.4, 0.0, 0.0)), (1, (1.2, 0.0, 0.0))], 1.0)
    assert idx.cells_of((0.4, 0, 0))[0] == idx.cells_of((1.2, 0, 0))[0] == (0, 0, 0)
    assert idx.candidates((0.4, 0, 0)) == [0, 1]


def test_empty_index_has_four_empty_grids():
    idx = ShiftedGridIndex.build([], 0.5)
    assert len(idx.grids) == 4 and all(len(g) == 0 for g in idx.grids)
    assert idx.query((0, 0, 0)) == []


def test_every_point_in_exactly_four_cells():
    pts = np.random.default_rng(0).random((100_000, 3))
    idx = ShiftedGridIndex.build(enumerate(pts), 1e-3)
    per_point = np.zeros(len(pts), dtype=int)
    for grid in idx.grids:
        for ids in grid.values():
            per_point[ids] += 1
    assert np.all(per_point == 1 * 4)


def test_cell_formula():
    idx = ShiftedGridIndex.build([(7, (0.95, -0.05, 2.0))], 0.25)
    for g, key in enumerate(idx.cells_of((0.95, -0.05, 2.0))):
        expect = tuple(math.floor((x - g * 0.25) / 1.0) for x in (0.95, -0.05, 2.0))
        assert key == expect and 7 in idx.grids[g][key]


def test_boundary_point_goes_to_higher_cell():
    idx = ShiftedGridIndex.build([(0, (4.0, 0.0, 0.0))], 1.0)
    assert idx.cells_of((4.0, 0, 0))[0] == (1, 0, 0)


def test_exact_hit_and_far_miss():
    idx = ShiftedGridIndex.build([(3, (0.0, 0.0, 0.0))], 1.0)
    assert idx.query((0.0, 0.0, 0.0)) == [3]
    assert idx.query((10.0, 0.0, 0.0)) == []
    assert idx.candidates((10.0, 0.0, 0.0)) == []


def test_errors():
    with pytest.raises(InvalidTolerance):
        ShiftedGridIndex.build([], 0.0)
    with pytest.raises(InvalidTolerance):
        ShiftedGridIndex.build([], float("nan"))
    with pytest.raises(DuplicateId):
        ShiftedGridIndex.build([(1, (0, 0, 0)), (1, (1, 1, 1))], 1.0)


def _brute(pts, p, delta):
    d = np.sqrt(((pts - np.asarray(p)) ** 2).sum(axis=1))
    return sorted(np.flatnonzero(d <= delta).tolist())


@given(
    pts=st.lists(point, min_size=1, max_size=300),
    probe=point,
    delta=st.floats(1e-3, 3.0),
)
def test_query_equals_brute_force(pts, probe, delta):
    arr = np.array(pts)
    idx = ShiftedGridIndex.build(enumerate(arr), delta)
    for p in [probe, *arr[:20]]:
        got = idx.query(p)
        assert got == _brute(arr, p, delta)
        bound = 4 * math.sqrt(3) * delta
        for c in idx.candidates(p):
            assert np.linalg.norm(arr[c] - np.asarray(p)) <= bound * (1 + 1e-12)


def test_completeness_against_brute_force_2000_points():
    rng = np.random.default_rng(5)
    pts = rng.random((2000, 3)) * 0.5
    delta = 0.02
    idx = ShiftedGridIndex.build(enumerate(pts), delta)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    for i in range(0, 2000, 7):
        assert idx.query(pts[i]) == np.flatnonzero(np.sqrt(d2[i]) <= delta).tolist()


@given(
    base=point,
    direction=st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda d: np.linalg.norm(d) > 1e-3),
    frac=st.floats(0.0, 1.0),
    delta=st.floats(1e-4, 1.0),
)
def test_pair_within_delta_always_co_celled(base, direction, frac, delta):
    d = np.asarray(direction) / np.linalg.norm(direction)
    q = np.asarray(base) + d * frac * delta * (1 - 1e-12)
    idx = ShiftedGridIndex.build([(0, q)], delta)
    assert 0 in idx.query(base)


def test_higher_dimension_index():
    rng = np.random.default_rng(2)
    pts = rng.random((300, 16))
    idx = ShiftedGridIndex.build(enumerate(pts), 0.05, dim=16)
    q = pts[10] + 0.01 / 4
    assert 10 in idx.query(q)
    assert len(idx.cells_of(q)) == 17


@given(
    pts=st.lists(point, min_size=0, max_size=120),
    probes=st.lists(point, min_size=0, max_size=40),
    delta=st.floats(1e-2, 3.0),
)
def test_batch_queries_match_single_queries(pts, probes, delta):
    idx = ShiftedGridIndex.build([(3 * i + 1, p) for i, p in enumerate(pts)], delta)
    rows, ids = idx.candidate_pairs(probes)
    assert list(zip(rows.tolist(), ids.tolist())) == [(k, c) for k, p in enumerate(probes) for c in idx.candidates(p)]
    rows, ids = idx.query_pairs(probes)
    assert list(zip(rows.tolist(), ids.tolist())) == [(k, c) for k, p in enumerate(probes) for c in idx.query(p)]


def test_batch_query_with_huge_key_range():
    pts = [(0, (0.0, 0.0, 0.0)), (1, (1e12, -1e12, 1e12)), (2, (0.5e-3, 0.0, 0.0))]
    idx = ShiftedGridIndex.build(pts, 1e-3)
    rows, ids = idx.query_pairs([(0.0, 0.0, 0.0), (1e12, -1e12, 1e12)])
    assert list(zip(rows.tolist(), ids.tolist())) == [(0, 0), (0, 2), (1, 1)]
