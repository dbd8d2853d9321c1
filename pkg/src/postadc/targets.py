"""Data-driven weight vectors ``eta`` defining the selected effect ``eta^T mu``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .adc import FactorizationError, GpUcbConfig, rbf_gram
from .candidates import WindowIndexSet, enumerate_windows

ZERO_ETA_TOL = 1e-12

TWO_SAMPLE_RULES = ("high_low_region", "winner_runner_up")
ONE_SAMPLE_RULES = ("top_n", "fixed_region", "gp_mean_at_point")
RULES = TWO_SAMPLE_RULES + ONE_SAMPLE_RULES


class DegenerateSelectionError(ValueError):
    """The selection rule cannot produce a usable, non-zero ``eta``."""


@dataclass(frozen=True)
class Selection:
    """Outcome of a target rule on one response vector.

    ``sets`` holds the selected index sets the rule conditions on: ``(I, J)``
    for two-sample rules, ``(S,)`` for one-sample rules. Indices are 0-based
    steps.
    """

    rule: str
    params: dict
    sets: tuple[tuple[int, ...], ...]
    eta: np.ndarray
    windows: tuple[WindowIndexSet, ...] = field(default=(), compare=False, repr=False)

    @property
    def data_dependent(self) -> bool:
        return self.rule in ("high_low_region", "top_n", "winner_runner_up")


def _check_eta(eta: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(eta)) or np.max(np.abs(eta)) < ZERO_ETA_TOL:
        raise DegenerateSelectionError("selected weight vector is (numerically) zero")
    return eta


def _indicator_mean(members, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[list(members)] = 1.0 / len(members)
    return v


def window_mean_matrix(windows, n: int) -> np.ndarray:
    """Rows are ``1_C / |C|`` for each window ``C``."""
    W = np.zeros((len(windows), n))
    for k, w in enumerate(windows):
        W[k, list(w.member_steps)] = 1.0 / len(w)
    return W


def select_high_low(trajectory_points, y, side: float, windows=None) -> tuple[tuple[int, ...], tuple[int, ...], np.ndarray]:
    """Windows with the largest and smallest sample mean, and ``eta = 1_I/|I| - 1_J/|J|``.

    Ties go to the lexicographically smallest member tuple.
    """
    y = np.asarray(y, dtype=float)
    if windows is None:
        windows = enumerate_windows(trajectory_points, side)
    if len(windows) < 2:
        raise DegenerateSelectionError("need at least two distinct windows")
    means = window_mean_matrix(windows, y.shape[0]) @ y
    hi = windows[int(np.argmax(means))].member_steps
    lo = windows[int(np.argmin(means))].member_steps
    if hi == lo:
        raise DegenerateSelectionError("high and low windows coincide")
    eta = _indicator_mean(hi, y.shape[0]) - _indicator_mean(lo, y.shape[0])
    return hi, lo, _check_eta(eta)


def top_n_set(y, n: int) -> tuple[int, ...]:
    y = np.asarray(y, dtype=float)
    if not 1 <= n <= y.shape[0]:
        raise ValueError(f"n must lie in [1, {y.shape[0]}], got {n}")
    order = np.argsort(-y, kind="stable")
    return tuple(sorted(int(i) for i in order[:n]))


def select_top_n(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return _check_eta(_indicator_mean(top_n_set(y, n), y.shape[0]))


def winner_runner_up(y) -> tuple[int, int]:
    y = np.asarray(y, dtype=float)
    if y.shape[0] < 2:
        raise ValueError("winner vs runner-up needs at least two responses")
    order = np.argsort(-y, kind="stable")
    return int(order[0]), int(order[1])


def select_winner_runner_up(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    i, j = winner_runner_up(y)
    eta = np.zeros(y.shape[0])
    eta[i], eta[j] = 1.0, -1.0
    return eta


def region_members(trajectory_points, lower, upper) -> tuple[int, ...]:
    pts = np.atleast_2d(np.asarray(trajectory_points, dtype=float))
    inside = np.all((pts >= np.asarray(lower)) & (pts <= np.asarray(upper)), axis=1)
    return tuple(int(t) for t in np.flatnonzero(inside))


def fixed_region_eta(trajectory_points, lower, upper) -> np.ndarray:
    """Average over the queried points inside the box ``[lower, upper]``."""
    members = region_members(trajectory_points, lower, upper)
    if not members:
        raise DegenerateSelectionError("no queried point falls inside the region")
    return _indicator_mean(members, len(np.atleast_2d(trajectory_points)))


def gp_mean_eta(trajectory_points, x_target, config: GpUcbConfig) -> np.ndarray:
    """``(K_N + sigma^2 I)^{-1} k_N(x)``: weights of the GP posterior mean at ``x``."""
    X = np.atleast_2d(np.asarray(trajectory_points, dtype=float))
    K = rbf_gram(X, X, config.kernel_variance, config.length_scale)
    try:
        cf = cho_factor(K + config.noise_variance * np.eye(len(X)), lower=True)
    except LinAlgError as exc:
        raise FactorizationError(len(X), str(exc)) from exc
    k = rbf_gram(X, np.atleast_2d(x_target), config.kernel_variance, config.length_scale)[:, 0]
    return _check_eta(cho_solve(cf, k))


def select_target(rule: str, trajectory_points, y, params: dict | None = None, windows=None) -> Selection:
    """Apply a target rule; ``params`` carries ``side``, ``n``, ``lower``/``upper``
    or ``x_target``/``gp_config`` as the rule needs."""
    params = dict(params or {})
    y = np.asarray(y, dtype=float)
    if rule == "high_low_region":
        if windows is None:
            windows = enumerate_windows(trajectory_points, params["side"])
        hi, lo, eta = select_high_low(trajectory_points, y, params["side"], windows)
        return Selection(rule, params, (hi, lo), eta, tuple(windows))
    if rule == "top_n":
        s = top_n_set(y, int(params["n"]))
        return Selection(rule, params, (s,), _indicator_mean(s, y.shape[0]))
    if rule == "winner_runner_up":
        i, j = winner_runner_up(y)
        return Selection(rule, params, ((i,), (j,)), select_winner_runner_up(y))
    if rule == "fixed_region":
        eta = fixed_region_eta(trajectory_points, params["lower"], params["upper"])
        return Selection(rule, params, (tuple(int(t) for t in np.flatnonzero(eta)),), eta)
    if rule == "gp_mean_at_point":
        eta = gp_mean_eta(trajectory_points, params["x_target"], params["gp_config"])
        return Selection(rule, params, (), eta)
    raise ValueError(f"unknown target rule {rule!r}")
