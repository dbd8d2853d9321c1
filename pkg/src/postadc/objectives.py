"""Synthetic objective families rescaled to ``[-a, a]`` over a candidate set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .candidates import CandidateSet


def _sinc(u):
    return np.sinc(10.0 * (u - 0.5))  # numpy's sinc is sin(pi t)/(pi t)


def _cos(u):
    return -np.cos(2.0 * np.pi * u)


def _chirp(u):
    return np.sin(2.0 * np.pi * u**2)


def _bump(u):
    return np.exp(-((u - 0.7) ** 2) / (2.0 * 0.08**2))


def _peak(u):
    return 1.0 - np.abs(u - 0.4)


def _negative_forrester(u):
    return -((6.0 * u - 2.0) ** 2) * np.sin(12.0 * u - 4.0)


TEMPLATES = {
    "sinc": _sinc,
    "cos": _cos,
    "chirp": _chirp,
    "bump": _bump,
    "peak": _peak,
    "negative_forrester": _negative_forrester,
}
FAMILIES = tuple(TEMPLATES) + ("constant_zero",)


@dataclass(frozen=True)
class ObjectiveSpec:
    family: str
    amplitude: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown objective family {self.family!r}; expected one of {FAMILIES}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")


def synth_objective(spec: ObjectiveSpec, candidates: CandidateSet) -> np.ndarray:
    """Mean response at every candidate: coordinate-averaged template, min-max
    mapped to [-1, 1] over the candidates, times the amplitude."""
    if spec.family == "constant_zero" or spec.amplitude == 0.0:
        return np.zeros(candidates.size)
    raw = TEMPLATES[spec.family](candidates.points).mean(axis=1)
    lo, hi = float(raw.min()), float(raw.max())
    if not hi > lo:
        raise ValueError(f"family {spec.family!r} is constant on this candidate set; cannot rescale")
    return spec.amplitude * (2.0 * raw - (hi + lo)) / (hi - lo)
