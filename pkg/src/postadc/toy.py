"""Three-candidate, two-query toy ADC with closed-form truncation sets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adc import ToyAdc, ToyConfig, toy_candidates
from .geometry import compute_line, truncation_set
from .intervals import IntervalSet
from .pipeline import observe_fixed


def toy_truncation(y1: float, y2: float, threshold: float = 0.0) -> tuple[tuple[int, ...], np.ndarray, IntervalSet]:
    """Run the toy ADC on ``(y1, y2)`` with the top-1 target; return trajectory, eta and Z."""
    model = ToyAdc(toy_candidates(), ToyConfig(threshold))
    event = observe_fixed(model, (0,), [y1, y2], "top_n", {"n": 1})
    line = compute_line(event.selection.eta, 1.0, event.y)
    return event.trajectory.indices, event.selection.eta, truncation_set(event, line)


def toy_closed_form(y1: float, y2: float) -> tuple[str, float, float]:
    """Branch label and the analytic truncation-set endpoints (threshold 0)."""
    second = 2 if y1 < 0 else 3
    winner_is_first = y1 >= y2
    if second == 2 and not winner_is_first:
        return "T=(1,2), eta=(0,1)", y1, math.inf
    if second == 2:
        return "T=(1,2), eta=(1,0)", y2, 0.0
    if winner_is_first:
        return "T=(1,3), eta=(1,0)", max(0.0, y2), math.inf
    return "T=(1,3), eta=(0,1)", y1, math.inf


@dataclass
class ToyCheckReport:
    draws: int
    failures: list[str]
    branch_counts: dict[str, int]

    @property
    def passed(self) -> bool:
        return not self.failures


def run_toy_check(draws: int = 1000, seed: int = 0, tol: float = 1e-12) -> ToyCheckReport:
    """Compare computed and analytic truncation sets on random ``(y1, y2)`` draws
    covering all four branches."""
    rng = np.random.Generator(np.random.Philox(seed))
    failures, counts = [], {}
    for k in range(draws):
        # cycle through the sign patterns so every branch is exercised
        y1 = abs(rng.normal()) * (1 if k % 2 else -1)
        y2 = y1 + (abs(rng.normal()) * (1 if (k // 2) % 2 else -1))
        label, lo, hi = toy_closed_form(y1, y2)
        counts[label] = counts.get(label, 0) + 1
        try:
            _, _, Z = toy_truncation(y1, y2)
        except ArithmeticError as exc:
            failures.append(f"{label}: y=({y1!r}, {y2!r}) raised {exc}")
            continue
        ok = len(Z) == 1 and _close(Z.lower, lo, tol) and _close(Z.upper, hi, tol)
        if not ok:
            failures.append(f"{label}: y=({y1!r}, {y2!r}) expected [{lo}, {hi}] got {Z}")
    return ToyCheckReport(draws, failures, counts)


def _close(a: float, b: float, tol: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol
