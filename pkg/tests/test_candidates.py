import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from postadc.candidates import (
    enumerate_windows,
    make_grid,
    points_per_axis_for_dim,
    side_length_for_dim,
    window_members,
)


def test_grid_1d_three_points():
    g = make_grid(1, 3)
    np.testing.assert_array_equal(g.points[:, 0], [0.0, 0.5, 1.0])


def test_grid_2d_corners_row_major():
    g = make_grid(2, 2)
    np.testing.assert_array_equal(g.points, [[0, 0], [0, 1], [1, 0], [1, 1]])


def test_grid_1024():
    g = make_grid(1, 1024)
    assert g.size == 1024
    assert np.allclose(np.diff(g.points[:, 0]), 1 / 1023)


@pytest.mark.parametrize("d, m", [(0, 3), (1, 1), (2, 0)])
def test_grid_rejects_bad_sizes(d, m):
    with pytest.raises(ValueError):
        make_grid(d, m)


def test_points_per_axis():
    assert points_per_axis_for_dim(1) == 1024
    assert points_per_axis_for_dim(2) == 32
    assert points_per_axis_for_dim(3) == 10


def test_side_lengths():
    assert side_length_for_dim(1, 0.2) == pytest.approx(0.2)
    assert side_length_for_dim(2, 0.25) == pytest.approx(0.5)
    assert side_length_for_dim(3, 0.2) == pytest.approx(0.5848035476)
    with pytest.raises(ValueError):
        side_length_for_dim(1, 1.5)


def _scan_windows(points, side, step):
    """Dense anchor scan over the bounding box, the brute-force reference."""
    pts = np.atleast_2d(points)
    axes = [np.arange(pts[:, j].min() - side - step, pts[:, j].max() + step, step) for j in range(pts.shape[1])]
    found = set()
    for anchor in itertools.product(*axes):
        m = window_members(pts, anchor, side)
        if m:
            found.add(m)
    return found


def test_windows_three_points_overlapping_pair():
    w = enumerate_windows(np.array([[0.1], [0.15], [0.9]]), 0.2)
    assert [x.member_steps for x in w] == [(0,), (0, 1), (1,), (2,)]


def test_windows_single_point():
    w = enumerate_windows(np.array([[0.3, 0.7]]), 0.1)
    assert [x.member_steps for x in w] == [(0,)]


def test_windows_spaced_out():
    w = enumerate_windows(np.array([[0.0], [0.5], [1.0]]), 0.2)
    assert [x.member_steps for x in w] == [(0,), (1,), (2,)]


def test_windows_example_matches_dense_scan():
    pts = np.array([[0.1], [0.15], [0.9]])
    found = {w.member_steps for w in enumerate_windows(pts, 0.2)}
    assert found == _scan_windows(pts, 0.2, 0.002)


coords = st.floats(0.0, 1.0, allow_nan=False).map(lambda v: round(v, 3))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=6), st.sampled_from([0.15, 0.3, 0.5]))
def test_windows_complete_and_sound_2d(raw, side):
    pts = np.array(raw)
    windows = enumerate_windows(pts, side)
    sets = [w.member_steps for w in windows]
    assert len(sets) == len(set(sets))
    assert sets == sorted(sets)
    for w in windows:
        assert window_members(pts, w.anchor, side) == w.member_steps
    assert _scan_windows(pts, side, side / 100) <= set(sets)


@settings(max_examples=60, deadline=None)
@given(st.lists(coords, min_size=1, max_size=10), st.sampled_from([0.05, 0.2, 0.35]))
def test_windows_complete_1d(raw, side):
    pts = np.array(raw)[:, None]
    sets = {w.member_steps for w in enumerate_windows(pts, side)}
    assert _scan_windows(pts, side, side / 100) <= sets


def test_duplicate_points_share_windows():
    pts = np.array([[0.2], [0.2], [0.8]])
    for w in enumerate_windows(pts, 0.1):
        assert (0 in w.member_steps) == (1 in w.member_steps)
