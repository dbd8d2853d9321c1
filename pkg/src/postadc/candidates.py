"""Finite candidate grids and the sliding-window region family."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CandidateSet:
    """Finite query domain: ``M`` distinct points in ``[0, 1]^d``.

    ``points`` is an ``(M, d)`` array in a fixed order. ``points_per_axis`` is
    only meaningful for generated grids (0 for arbitrary point clouds).
    """

    points: np.ndarray
    points_per_axis: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a non-empty (M, d) array")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ValueError("candidate coordinates must lie in [0, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.size


def make_grid(d: int, m_per_axis: int) -> CandidateSet:
    """Axis-aligned grid ``{0, 1/(m-1), ..., 1}^d`` in row-major order.

    The last axis varies fastest, so ``make_grid(2, 2)`` yields
    ``(0,0), (0,1), (1,0), (1,1)``.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if m_per_axis < 2:
        raise ValueError(f"m_per_axis must be >= 2, got {m_per_axis}")
    axis = np.linspace(0.0, 1.0, m_per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    points = np.stack([g.ravel() for g in mesh], axis=1)
    return CandidateSet(points, points_per_axis=m_per_axis)


def points_per_axis_for_dim(d: int, m1: int = 1024) -> int:
    """``round(m1 ** (1/d))``: keeps the grid size near ``m1`` in every dimension."""
    return int(round(m1 ** (1.0 / d)))


def side_length_for_dim(d: int, base: float = 0.2) -> float:
    """Window side ``base ** (1/d)`` so a window covers a fixed volume fraction."""
    if not 0.0 < base < 1.0:
        raise ValueError(f"base side length must lie in (0, 1), got {base}")
    return base ** (1.0 / d)


@dataclass(frozen=True)
class WindowIndexSet:
    """Steps whose queried point falls in the box ``prod_j [anchor_j, anchor_j + side]``.

    ``member_steps`` are 0-based step indices. A window's identity is its
    member set; the anchor is kept only as a witness.
    """

    member_steps: tuple[int, ...]
    anchor: tuple[float, ...]
    side: float

    def __len__(self) -> int:
        return len(self.member_steps)


def window_members(points: np.ndarray, anchor, side: float) -> tuple[int, ...]:
    """Steps ``t`` with ``anchor <= x_t <= anchor + side`` on every axis."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    s = np.asarray(anchor, dtype=float)
    inside = np.all((pts >= s) & (pts <= s + side), axis=1)
    return tuple(int(t) for t in np.flatnonzero(inside))


def _axis_anchors(coords: np.ndarray, side: float) -> np.ndarray:
    # Membership along one axis only changes where the lower face passes a
    # coordinate or the upper face reaches one; breakpoints plus the midpoints
    # between them realise every distinct per-axis membership pattern.
    breaks = np.unique(np.concatenate([coords, coords - side]))
    mids = 0.5 * (breaks[1:] + breaks[:-1])
    return np.unique(np.concatenate([breaks, mids]))


def enumerate_windows(queried_points, side: float) -> list[WindowIndexSet]:
    """Every distinct non-empty sliding-window index set over the queried points.

    Works axis by axis: collect the distinct membership masks along each
    axis, then intersect across axes, deduplicating after every axis so
    the product never materialises in full. Output is sorted by member
    tuple.
    """
    pts = np.atleast_2d(np.asarray(queried_points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("need at least one queried point")
    if side <= 0:
        raise ValueError(f"side length must be positive, got {side}")
    n, d = pts.shape

    # combined: bitmask -> anchor tuple for the axes processed so far
    combined: dict[int, tuple[float, ...]] = {(1 << n) - 1: ()}
    for j in range(d):
        col = pts[:, j]
        axis_masks: dict[int, float] = {}
        for s in _axis_anchors(col, side):
            inside = np.flatnonzero((col >= s) & (col <= s + side))
            if inside.size == 0:
                continue
            mask = 0
            for t in inside:
                mask |= 1 << int(t)
            axis_masks.setdefault(mask, float(s))
        nxt: dict[int, tuple[float, ...]] = {}
        for (m0, a0), (m1, a1) in itertools.product(combined.items(), axis_masks.items()):
            m = m0 & m1
            if m and m not in nxt:
                nxt[m] = a0 + (a1,)
        combined = nxt

    windows = []
    for mask, anchor in combined.items():
        members = tuple(t for t in range(n) if mask >> t & 1)
        windows.append(WindowIndexSet(members, anchor, float(side)))
    windows.sort(key=lambda w: w.member_steps)
    return windows
