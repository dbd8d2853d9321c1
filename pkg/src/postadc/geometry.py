"""Selection-event geometry along the line ``Y(z) = a + b z``.

The observed event (trajectory, selected target) is rewritten as a list of
affine constraints ``c + d z <= 0``; intersecting them gives the truncation
set of the test statistic. `scan_oracle` checks the same set by brute-force
replay of the whole pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .adc import GpUcb, ToyAdc, Tpe, Trajectory, drive, tpe_partition
from .intervals import IntervalSet
from .targets import (
    DegenerateSelectionError,
    Selection,
    ZERO_ETA_TOL,
    select_target,
    window_mean_matrix,
)

SLOPE_TOL = 1e-12
CONSISTENCY_TOL = 1e-8

MASKS = ("full", "trajectory", "target")


class InconsistentEventError(ArithmeticError):
    """The observed data violate one of their own selection constraints."""


@dataclass(frozen=True)
class LineSlice:
    """``Y(z) = a + b z`` with ``eta^T a = 0`` and ``eta^T b = 1``."""

    a: np.ndarray
    b: np.ndarray
    v_eta: float
    t_obs: float

    def at(self, z: float) -> np.ndarray:
        return self.a + self.b * z


def compute_line(eta, sigma2: float, y) -> LineSlice:
    """Split ``y`` into its component along ``eta`` and the residual.

    With isotropic noise ``b = eta / |eta|^2`` and ``v = sigma2 |eta|^2``.
    """
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    nrm2 = float(eta @ eta)
    if not nrm2 > 0 or np.max(np.abs(eta)) < ZERO_ETA_TOL:
        raise DegenerateSelectionError("eta is zero")
    b = eta / nrm2
    t_obs = float(eta @ y)
    return LineSlice(y - b * t_obs, b, sigma2 * nrm2, t_obs)


# --------------------------------------------------------------------------- constraints


@dataclass(frozen=True)
class LinearConstraint:
    """``c + d_coef * z  (sense)  0``."""

    c: float
    d_coef: float
    sense: str
    tag: str = ""

    def normalized(self) -> tuple[float, float]:
        """Coefficients of the equivalent ``c' + d' z <= 0``."""
        if self.sense in ("<=", "<"):
            return self.c, self.d_coef
        return -self.c, -self.d_coef

    def value(self, z: float) -> float:
        return self.c + self.d_coef * z


@dataclass
class ConstraintBlock:
    """Many constraints ``c + d z <= 0`` from one family, stored as arrays."""

    family: str  # "trajectory" or "target"
    c: np.ndarray
    d: np.ndarray
    tags: list[str] = field(default_factory=list)
    strict: np.ndarray | None = None

    def __len__(self) -> int:
        return self.c.shape[0]

    def constraints(self) -> list[LinearConstraint]:
        strict = self.strict if self.strict is not None else np.zeros(len(self), bool)
        return [
            LinearConstraint(float(c), float(d), "<" if s else "<=", tag)
            for c, d, s, tag in zip(self.c, self.d, strict, self.tags)
        ]


def _block(family: str, c, d, tags, strict=None) -> ConstraintBlock:
    return ConstraintBlock(family, np.asarray(c, dtype=float).ravel(), np.asarray(d, dtype=float).ravel(), list(tags),
                           None if strict is None else np.asarray(strict, bool))


def gpucb_constraints(model: GpUcb, trajectory: Trajectory, initial_count: int, line: LineSlice) -> ConstraintBlock:
    """Score of every rival candidate minus score of the chosen one, at every step."""
    idx = trajectory.indices
    M = model.candidates.size
    kappa = model.config.kappa
    cs, ds, tags = [], [], []
    for n in range(initial_count, len(idx)):
        st = model.step(idx[:n])
        chosen = idx[n]
        diff = st.coef - st.coef[chosen]
        c = diff @ line.a[:n] + kappa * (st.sd - st.sd[chosen])
        d = diff @ line.b[:n]
        keep = np.arange(M) != chosen
        cs.append(c[keep])
        ds.append(d[keep])
        tags.extend(f"gpucb:step={n}:cand={x}:chosen={chosen}" for x in np.flatnonzero(keep))
    if not cs:
        return _block("trajectory", [], [], [])
    return _block("trajectory", np.concatenate(cs), np.concatenate(ds), tags)


def _pairwise_order(family: str, winners: Sequence[int], losers: Sequence[int], line: LineSlice, prefix: str):
    # y_j(z) - y_i(z) <= 0 for every winner i and loser j
    w = np.asarray(winners, dtype=int)
    lo = np.asarray(losers, dtype=int)
    if w.size == 0 or lo.size == 0:
        return [], [], []
    c = (line.a[lo][None, :] - line.a[w][:, None]).ravel()
    d = (line.b[lo][None, :] - line.b[w][:, None]).ravel()
    tags = [f"{prefix}:{i}>={j}" for i in w for j in lo]
    return c, d, tags


def tpe_constraints(model: Tpe, trajectory: Trajectory, y, initial_count: int, line: LineSlice) -> ConstraintBlock:
    """Quantile-partition constraints; the (z-free) score comparisons are verified."""
    idx = trajectory.indices
    y = np.asarray(y, dtype=float)
    cs, ds, tags = [], [], []
    for k, n in enumerate(range(initial_count, len(idx))):
        top, rest = tpe_partition(y[:n], model.config.gamma)
        if trajectory.partitions and tuple(trajectory.partitions[k]) != top:
            raise InconsistentEventError(f"TPE partition at step {n} does not match the recorded trajectory")
        g, l = model.densities(idx[:n], top, rest)
        chosen = idx[n]
        lhs = g * l[chosen]
        rhs = g[chosen] * l
        if np.any(lhs > rhs * (1 + 1e-12)):
            bad = int(np.argmax(lhs - rhs))
            raise InconsistentEventError(f"TPE score comparison fails at step {n}: candidate {bad} beats chosen {chosen}")
        c, d, t = _pairwise_order("trajectory", top, rest, line, f"tpe:step={n}")
        cs.append(np.asarray(c))
        ds.append(np.asarray(d))
        tags.extend(t)
    if not cs:
        return _block("trajectory", [], [], [])
    return _block("trajectory", np.concatenate(cs), np.concatenate(ds), tags)


def toy_constraints(model: ToyAdc, trajectory: Trajectory, line: LineSlice) -> ConstraintBlock:
    th = model.config.threshold
    if trajectory.indices[1] == 1:  # y_1 < threshold
        return _block("trajectory", [line.a[0] - th], [line.b[0]], ["toy:y1<0"], [True])
    return _block("trajectory", [th - line.a[0]], [-line.b[0]], ["toy:y1>=0"], [False])


def trajectory_constraints(model, trajectory: Trajectory, y, initial_count: int, line: LineSlice) -> ConstraintBlock:
    if isinstance(model, GpUcb):
        return gpucb_constraints(model, trajectory, initial_count, line)
    if isinstance(model, Tpe):
        return tpe_constraints(model, trajectory, y, initial_count, line)
    if isinstance(model, ToyAdc):
        return toy_constraints(model, trajectory, line)
    raise TypeError(f"no constraint extractor for {type(model).__name__}")


def target_constraints(selection: Selection, line: LineSlice) -> ConstraintBlock:
    """Constraints reproducing the selected sets; empty for data-independent rules."""
    rule = selection.rule
    n = line.a.shape[0]
    if rule == "high_low_region":
        windows = selection.windows
        W = window_mean_matrix(windows, n)
        ma, mb = W @ line.a, W @ line.b
        members = [w.member_steps for w in windows]
        hi = members.index(selection.sets[0])
        lo = members.index(selection.sets[1])
        cs, ds, tags = [], [], []
        for k in range(len(windows)):
            if k != hi:  # mean_C - mean_I <= 0
                cs.append(ma[k] - ma[hi])
                ds.append(mb[k] - mb[hi])
                tags.append(f"high:win={k}<=win={hi}")
            if k != lo and k != hi:  # mean_J - mean_C <= 0; the (I, J) pair is already in
                cs.append(ma[lo] - ma[k])
                ds.append(mb[lo] - mb[k])
                tags.append(f"low:win={lo}<=win={k}")
        return _block("target", cs, ds, tags)
    if rule == "top_n":
        S = selection.sets[0]
        rest = [j for j in range(n) if j not in set(S)]
        c, d, t = _pairwise_order("target", S, rest, line, "top_n")
        return _block("target", c, d, t)
    if rule == "winner_runner_up":
        (i,), (j,) = selection.sets
        c1, d1, t1 = _pairwise_order("target", [i], [k for k in range(n) if k != i], line, "winner")
        c2, d2, t2 = _pairwise_order("target", [j], [k for k in range(n) if k not in (i, j)], line, "runner_up")
        return _block("target", np.concatenate([c1, c2]), np.concatenate([d1, d2]), t1 + t2)
    if rule in ("fixed_region", "gp_mean_at_point"):
        return _block("target", [], [], [])
    raise ValueError(f"unknown target rule {rule!r}")


def _normalized_arrays(constraints) -> tuple[np.ndarray, np.ndarray]:
    cs, ds = [], []
    for item in constraints:
        if isinstance(item, ConstraintBlock):
            cs.append(item.c)
            ds.append(item.d)
        else:
            c, d = item.normalized()
            cs.append(np.array([c]))
            ds.append(np.array([d]))
    if not cs:
        return np.empty(0), np.empty(0)
    return np.concatenate(cs), np.concatenate(ds)


def solve_constraints(constraints: Iterable, t_obs: float, slope_tol: float = SLOPE_TOL,
                      tol: float = CONSISTENCY_TOL) -> IntervalSet:
    """Intersect the half-lines; the result is a single closed interval containing ``t_obs``.

    ``constraints`` may mix `LinearConstraint` objects and `ConstraintBlock`s.
    Constraints with ``|d| <= slope_tol`` are treated as constants and only
    checked.
    """
    c, d = _normalized_arrays(constraints)
    scale = np.maximum(1.0, np.abs(c) + np.abs(d * t_obs))
    at_obs = c + d * t_obs
    if np.any(at_obs > tol * scale):
        k = int(np.argmax(at_obs / scale))
        raise InconsistentEventError(f"constraint {k} violated at t_obs by {at_obs[k]:.3g}")
    up = d > slope_tol
    down = d < -slope_tol
    hi = float(np.min(-c[up] / d[up])) if np.any(up) else math.inf
    lo = float(np.max(-c[down] / d[down])) if np.any(down) else -math.inf
    slack = 1e-7 * (1.0 + abs(t_obs))
    if t_obs < lo:
        if lo - t_obs > slack:
            raise InconsistentEventError(f"t_obs={t_obs} below the solved lower end {lo}")
        lo = t_obs
    if t_obs > hi:
        if t_obs - hi > slack:
            raise InconsistentEventError(f"t_obs={t_obs} above the solved upper end {hi}")
        hi = t_obs
    if not lo < hi:
        raise InconsistentEventError("truncation set collapsed to a point")
    return IntervalSet.single(lo, hi)


# --------------------------------------------------------------------------- events


@dataclass
class ObservedEvent:
    """Everything needed to rebuild the selection event on a line.

    ``model`` is the live acquisition object (`GpUcb`, `Tpe` or `ToyAdc`); its
    caches are reused by both constraint extraction and replay.
    """

    model: object
    trajectory: Trajectory
    y: np.ndarray
    n_init: int
    selection: Selection

    @property
    def points(self) -> np.ndarray:
        return self.model.candidates.points[list(self.trajectory.indices)]


def event_constraints(event: ObservedEvent, line: LineSlice, mask: str = "full") -> list[ConstraintBlock]:
    if mask not in MASKS:
        raise ValueError(f"unknown constraint mask {mask!r}")
    blocks = []
    if mask in ("full", "trajectory"):
        blocks.append(trajectory_constraints(event.model, event.trajectory, event.y, event.n_init, line))
    if mask in ("full", "target"):
        blocks.append(target_constraints(event.selection, line))
    return blocks


def truncation_set(event: ObservedEvent, line: LineSlice, mask: str = "full") -> IntervalSet:
    """Truncation set for ``mask``: ``full`` (post-ADC), ``trajectory``
    (conditioning on the trajectory only) or ``target`` (on the target only)."""
    return solve_constraints(event_constraints(event, line, mask), line.t_obs)


def _replay_matches(event: ObservedEvent, yz: np.ndarray, mask: str) -> bool:
    initial = event.trajectory.indices[: event.n_init]
    if mask in ("full", "trajectory"):
        try:
            traj, _ = drive(event.model, initial, len(event.trajectory) - event.n_init, lambda t, c: yz[t])
        except ValueError:
            return False
        if traj != event.trajectory:
            return False
    if mask in ("full", "target") and event.selection.data_dependent:
        sel = event.selection
        try:
            new = select_target(sel.rule, event.points, yz, sel.params, windows=sel.windows or None)
        except DegenerateSelectionError:
            return False
        return new.sets == sel.sets
    return True


def scan_oracle(event: ObservedEvent, line: LineSlice, z_grid, mask: str = "full") -> np.ndarray:
    """Replay the pipeline on ``a + b z`` for each ``z`` and report whether the
    observed event is reproduced."""
    return np.array([_replay_matches(event, line.at(float(z)), mask) for z in z_grid], dtype=bool)


def scan_mismatches(event: ObservedEvent, line: LineSlice, Z: IntervalSet, n_points: int = 2001,
                    half_width_sd: float = 8.0, endpoint_tol: float = 1e-9, mask: str = "full") -> list[float]:
    """Grid points over ``t_obs +- 8 sqrt(v)`` where replay and ``Z`` disagree,
    ignoring points within ``endpoint_tol`` of an endpoint of ``Z``."""
    half = half_width_sd * math.sqrt(line.v_eta)
    grid = np.linspace(line.t_obs - half, line.t_obs + half, n_points)
    member = scan_oracle(event, line, grid, mask)
    bad = []
    for z, m in zip(grid, member):
        if Z.distance_to_boundary(z) <= endpoint_tol:
            continue
        if m != (z in Z):
            bad.append(float(z))
    return bad


def corrupt_binding_constraint(blocks: list[ConstraintBlock], line: LineSlice, shift: float) -> list[ConstraintBlock]:
    """Negative-control hook: move the bound of the constraint that sets the
    finite end of Z nearest ``t_obs`` outward by ``shift``.

    Returns new blocks; the inputs are left untouched.
    """
    best = None  # (distance, block index, row)
    for k, blk in enumerate(blocks):
        for i, (c, d) in enumerate(zip(blk.c, blk.d)):
            if abs(d) <= SLOPE_TOL:
                continue
            dist = abs(-c / d - line.t_obs)
            if best is None or dist < best[0]:
                best = (dist, k, i)
    if best is None:
        raise ValueError("no sloped constraint to corrupt")
    _, k, i = best
    out = [ConstraintBlock(b.family, b.c.copy(), b.d.copy(), list(b.tags), b.strict) for b in blocks]
    # c + d z <= 0 has its bound at -c/d; adding |d| * shift to -c/d's far side widens Z
    out[k].c[i] -= abs(out[k].d[i]) * shift
    out[k].tags[i] += ":corrupted"
    return out


def dump_constraints(blocks: list[ConstraintBlock]) -> list[tuple[str, str, str, str, str]]:
    """Rows ``(family, tag, c, d, sense)`` in normalized ``c + d z <= 0`` form."""
    rows = []
    for blk in blocks:
        strict = blk.strict if blk.strict is not None else np.zeros(len(blk), bool)
        for c, d, s, tag in zip(blk.c, blk.d, strict, blk.tags):
            rows.append((blk.family, tag, repr(float(c)), repr(float(d)), "<" if s else "<="))
    return rows
