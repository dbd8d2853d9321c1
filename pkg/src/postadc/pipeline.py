"""One end-to-end pass: collect data adaptively, select a target, infer on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .adc import GpUcbConfig, drive
from .distributions import (
    SelectiveResult,
    bonferroni_inference,
    naive_inference,
    post_adc_inference,
    randomized_inference,
)
from .geometry import LineSlice, ObservedEvent, compute_line, truncation_set
from .intervals import IntervalSet
from .targets import select_target

METHODS = ("post_adc", "naive", "bonferroni", "wo_eta", "wo_T", "randomized")
MASK_FOR_METHOD = {"post_adc": "full", "wo_eta": "trajectory", "wo_T": "target"}


def observe(model, initial: Sequence[int], n_steps: int, respond: Callable[[int, int], float], rule: str,
            rule_params: dict) -> ObservedEvent:
    """Run the acquisitions and the target rule; return the observed selection event."""
    trajectory, y = drive(model, initial, n_steps, respond)
    points = model.candidates.points[list(trajectory.indices)]
    selection = select_target(rule, points, y, rule_params)
    return ObservedEvent(model, trajectory, y, len(initial), selection)


def observe_fixed(model, initial: Sequence[int], y, rule: str, rule_params: dict) -> ObservedEvent:
    """`observe` with responses read from a fixed vector in query order."""
    y = np.asarray(y, dtype=float)
    return observe(model, initial, y.shape[0] - len(initial), lambda t, c: y[t], rule, rule_params)


@dataclass
class Analysis:
    """Per-method results for one observed event. Failed methods map to an error string."""

    event: ObservedEvent
    line: LineSlice
    results: dict[str, SelectiveResult] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)
    sets: dict[str, IntervalSet] = field(default_factory=dict)


def analyze(event: ObservedEvent, sigma2: float, methods: Sequence[str], ci_alpha: float = 0.10,
            bonferroni_base: float = 3.0) -> Analysis:
    """Inference for every requested non-randomized method on a single event."""
    line = compute_line(event.selection.eta, sigma2, event.y)
    out = Analysis(event, line)
    for method in methods:
        if method == "randomized":
            continue
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        try:
            if method == "naive":
                out.results[method] = naive_inference(line.t_obs, line.v_eta, ci_alpha)
            elif method == "bonferroni":
                n_steps = len(event.trajectory) - event.n_init
                out.results[method] = bonferroni_inference(line.t_obs, line.v_eta, ci_alpha,
                                                           event.model.candidates.size, n_steps, bonferroni_base)
            else:
                Z = truncation_set(event, line, MASK_FOR_METHOD[method])
                out.sets[method] = Z
                out.results[method] = post_adc_inference(line.t_obs, line.v_eta, Z, ci_alpha, method=method)
        except ArithmeticError as exc:
            out.failures[method] = f"{type(exc).__name__}: {exc}"
    return out


@dataclass
class RandomizedOutcome:
    event: ObservedEvent  # selection on the randomized responses
    y: np.ndarray  # unrandomized responses in query order
    line: LineSlice  # slice through the randomized responses
    Z_tilde: IntervalSet
    result: SelectiveResult


def randomized_pipeline(model, initial: Sequence[int], n_steps: int, respond: Callable[[int, int], float],
                        omega, rule: str, rule_params: dict, sigma2: float, tau2: float,
                        ci_alpha: float = 0.10) -> RandomizedOutcome:
    """Select on ``y + omega``, infer on ``eta^T y``.

    ``respond`` returns the unrandomized response; ``omega[t]`` is added at
    step ``t`` before the optimizer or the target rule sees it.
    """
    omega = np.asarray(omega, dtype=float)
    event = observe(model, initial, n_steps, lambda t, c: respond(t, c) + omega[t], rule, rule_params)
    y = event.y - omega[: event.y.shape[0]]
    eta = event.selection.eta
    line = compute_line(eta, sigma2, event.y)
    Z_tilde = truncation_set(event, line, "full")
    t_obs = float(eta @ y)
    result = randomized_inference(t_obs, sigma2 * float(eta @ eta), tau2, float(eta @ eta), Z_tilde, ci_alpha)
    return RandomizedOutcome(event, y, line, Z_tilde, result)


def rule_params_for(rule: str, dim: int, side: float | None = None, top_n: int = 1, lower=None, upper=None,
                    x_target=None, gp_config: GpUcbConfig | None = None) -> dict:
    """Parameters the target rule needs, with dimension-aware defaults."""
    if rule == "high_low_region":
        return {"side": side if side is not None else 0.2 ** (1.0 / dim)}
    if rule == "top_n":
        return {"n": int(top_n)}
    if rule == "winner_runner_up":
        return {}
    if rule == "fixed_region":
        lo = np.full(dim, 0.0) if lower is None else np.broadcast_to(np.asarray(lower, float), (dim,))
        hi = np.full(dim, 0.5) if upper is None else np.broadcast_to(np.asarray(upper, float), (dim,))
        return {"lower": lo, "upper": hi}
    if rule == "gp_mean_at_point":
        xt = np.full(dim, 0.5) if x_target is None else np.broadcast_to(np.asarray(x_target, float), (dim,))
        return {"x_target": xt, "gp_config": gp_config or GpUcbConfig.for_dim(dim)}
    raise ValueError(f"unknown target rule {rule!r}")


def interval_bounds(Z: IntervalSet | None) -> tuple[float, float]:
    if Z is None or not Z:
        return math.nan, math.nan
    return Z.lower, Z.upper
