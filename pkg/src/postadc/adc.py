"""Active data collection: GP-UCB and TPE as deterministic acquisition maximisers.

Every algorithm here is a map from the responses observed so far to the
next candidate index. Ties are always broken towards the smallest index,
so the whole trajectory is a deterministic function of the initial design
and the response vector; `replay_trajectory` exposes that map directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .candidates import CandidateSet

VARIANCE_CLAMP_TOL = 1e-12


class FactorizationError(ArithmeticError):
    """Raised when ``K_n + sigma^2 I`` is not numerically positive definite."""

    def __init__(self, step: int, detail: str = ""):
        self.step = step
        super().__init__(f"Cholesky factorization failed at step n={step}" + (f": {detail}" if detail else ""))


class DegenerateSplitError(ValueError):
    """TPE quantile split leaves one side empty."""


# --------------------------------------------------------------------------- configs


@dataclass(frozen=True)
class GpUcbConfig:
    kernel_variance: float = 1.0
    length_scale: float = 0.1
    noise_variance: float = 1.0
    kappa: float = 2.0

    def __post_init__(self):
        for name in ("kernel_variance", "length_scale", "noise_variance", "kappa"):
            if not getattr(self, name) > 0:
                raise ValueError(f"GpUcbConfig.{name} must be > 0")

    @classmethod
    def for_dim(cls, d: int, base_length_scale: float = 0.1, **kw) -> "GpUcbConfig":
        """Defaults with the length scale widened by ``sqrt(d)``."""
        return cls(length_scale=base_length_scale * math.sqrt(d), **kw)


@dataclass(frozen=True)
class TpeConfig:
    gamma: float = 0.2
    bandwidth: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("TpeConfig.gamma must lie in (0, 1)")
        if not self.bandwidth > 0:
            raise ValueError("TpeConfig.bandwidth must be > 0")


@dataclass(frozen=True)
class ToyConfig:
    """Two-branch rule: after the first response go to candidate 2 if it is
    below ``threshold``, otherwise to candidate 3."""

    threshold: float = 0.0


# --------------------------------------------------------------------------- data


@dataclass(frozen=True)
class CollectedData:
    """Queried candidate indices and their responses, in query order."""

    indices: tuple[int, ...]
    y: np.ndarray
    n_init: int
    budget: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.shape != (len(self.indices),):
            raise ValueError("indices and y must have the same length")
        if len(self.indices) > self.budget:
            raise ValueError("more observations than the budget allows")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Trajectory:
    """Queried candidate indices ``x_1..x_N``.

    For TPE, ``partitions`` records the top-set ``H_n`` used at every
    acquisition step; the geometry conditions on it, so replays compare it
    too. Empty for the other algorithms.
    """

    indices: tuple[int, ...]
    partitions: tuple[tuple[int, ...], ...] = ()

    def __len__(self) -> int:
        return len(self.indices)


# --------------------------------------------------------------------------- kernels


def rbf_kernel(x, x2, variance: float = 1.0, length_scale: float = 0.1) -> float:
    """Squared-exponential kernel ``variance * exp(-|x - x2|^2 / (2 l^2))``."""
    diff = np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)
    return float(variance * np.exp(-0.5 * np.dot(diff, diff) / length_scale**2))


def rbf_gram(a: np.ndarray, b: np.ndarray, variance: float, length_scale: float) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    sq = np.sum(a**2, 1)[:, None] + np.sum(b**2, 1)[None, :] - 2.0 * a @ b.T
    np.maximum(sq, 0.0, out=sq)
    return variance * np.exp(-0.5 * sq / length_scale**2)


# --------------------------------------------------------------------------- GP


def _factor(K: np.ndarray, noise: float, step: int):
    try:
        return cho_factor(K + noise * np.eye(K.shape[0]), lower=True)
    except LinAlgError as exc:
        raise FactorizationError(step, str(exc)) from exc


def gp_posterior(history: CollectedData, points: np.ndarray, x, config: GpUcbConfig) -> tuple[float, float]:
    """Posterior mean and variance at ``x`` given the observed history.

    ``points`` are the coordinates of the candidate set the history indexes.
    """
    if len(history) == 0:
        raise ValueError("history must be non-empty")
    X = np.asarray(points, dtype=float)[list(history.indices)]
    K = rbf_gram(X, X, config.kernel_variance, config.length_scale)
    cf = _factor(K, config.noise_variance, len(history))
    kx = rbf_gram(X, np.atleast_2d(x), config.kernel_variance, config.length_scale)[:, 0]
    w = cho_solve(cf, kx)
    mean = float(w @ history.y)
    var = config.kernel_variance - float(kx @ w)
    return mean, _clamp_variance(var, len(history))


def _clamp_variance(var, step: int):
    if np.any(np.asarray(var) < -VARIANCE_CLAMP_TOL):
        raise FactorizationError(step, "posterior variance is materially negative")
    return np.maximum(var, 0.0) if isinstance(var, np.ndarray) else max(var, 0.0)


def gpucb_score(history: CollectedData, points: np.ndarray, x, config: GpUcbConfig) -> float:
    mean, var = gp_posterior(history, points, x, config)
    return mean + config.kappa * math.sqrt(var)


@dataclass(frozen=True)
class GpStep:
    """Solve for one history prefix: ``mean = coef @ y_prefix``, ``sd`` fixed."""

    coef: np.ndarray  # (M, n): rows k_n(x)^T (K_n + sigma^2 I)^{-1}
    sd: np.ndarray  # (M,)


class GpUcb:
    """GP-UCB over a finite candidate set with per-prefix cached solves."""

    name = "gpucb"

    def __init__(self, candidates: CandidateSet, config: GpUcbConfig):
        self.candidates = candidates
        self.config = config
        self.gram = rbf_gram(candidates.points, candidates.points, config.kernel_variance, config.length_scale)
        self._steps: dict[tuple[int, ...], GpStep] = {}

    def step(self, prefix: Sequence[int]) -> GpStep:
        key = tuple(prefix)
        cached = self._steps.get(key)
        if cached is not None:
            return cached
        idx = list(key)
        K_n = self.gram[np.ix_(idx, idx)]
        cf = _factor(K_n, self.config.noise_variance, len(idx))
        k_star = self.gram[:, idx]  # (M, n)
        coef = cho_solve(cf, k_star.T).T
        var = np.diag(self.gram) - np.einsum("ij,ij->i", coef, k_star)
        out = GpStep(coef, np.sqrt(_clamp_variance(var, len(idx))))
        self._steps[key] = out
        return out

    def scores(self, prefix: Sequence[int], y_prefix: np.ndarray):
        st = self.step(prefix)
        return st.coef @ y_prefix + self.config.kappa * st.sd, None


# --------------------------------------------------------------------------- TPE


def tpe_partition(y, gamma: float) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split step indices into the top ``ceil(gamma n)`` responses and the rest.

    Returns sorted 0-based index tuples ``(H, L)``. Ties enter ``H`` in index
    order.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    # guard against gamma*n landing a hair above an integer
    m = math.ceil(gamma * n - 1e-9)
    if m < 1 or m >= n:
        raise DegenerateSplitError(f"quantile split m={m} of n={n} leaves an empty side")
    order = np.argsort(-y, kind="stable")
    top = tuple(sorted(int(i) for i in order[:m]))
    rest = tuple(sorted(int(i) for i in order[m:]))
    return top, rest


def tpe_kernel(x, x2, bandwidth: float) -> float:
    diff = np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)
    return float(np.exp(-0.5 * np.dot(diff, diff) / bandwidth**2))


def tpe_densities(gram_rows: np.ndarray, top, rest) -> tuple[np.ndarray, np.ndarray]:
    """Kernel averages over the top and rest sets. ``gram_rows`` is ``(M, n)``."""
    g = gram_rows[:, list(top)].mean(axis=1)
    l = gram_rows[:, list(rest)].mean(axis=1)
    return g, l


def tpe_score(history: CollectedData, points: np.ndarray, x, config: TpeConfig) -> float:
    top, rest = tpe_partition(history.y, config.gamma)
    X = np.asarray(points, dtype=float)[list(history.indices)]
    k = rbf_gram(np.atleast_2d(x), X, 1.0, config.bandwidth)
    g, l = tpe_densities(k, top, rest)
    return float(g[0] / l[0])


class Tpe:
    name = "tpe"

    def __init__(self, candidates: CandidateSet, config: TpeConfig):
        self.candidates = candidates
        self.config = config
        self.gram = rbf_gram(candidates.points, candidates.points, 1.0, config.bandwidth)

    def densities(self, prefix: Sequence[int], top, rest):
        return tpe_densities(self.gram[:, list(prefix)], top, rest)

    def scores(self, prefix: Sequence[int], y_prefix: np.ndarray):
        top, rest = tpe_partition(y_prefix, self.config.gamma)
        g, l = self.densities(prefix, top, rest)
        return g / l, top


# --------------------------------------------------------------------------- toy


class ToyAdc:
    """Three candidates, budget two: the second query depends on the sign of
    the first response."""

    name = "toy"

    def __init__(self, candidates: CandidateSet, config: ToyConfig = ToyConfig()):
        if candidates.size != 3:
            raise ValueError("the toy ADC needs exactly three candidates")
        self.candidates = candidates
        self.config = config

    def scores(self, prefix: Sequence[int], y_prefix: np.ndarray):
        if len(prefix) != 1:
            raise ValueError("the toy ADC only makes one acquisition")
        out = np.zeros(3)
        out[1 if y_prefix[0] < self.config.threshold else 2] = 1.0
        return out, None


def toy_candidates() -> CandidateSet:
    return CandidateSet(np.array([[0.0], [0.5], [1.0]]))


# --------------------------------------------------------------------------- driver


def make_algorithm(algorithm: str, candidates: CandidateSet, config):
    if algorithm == "gpucb":
        return GpUcb(candidates, config or GpUcbConfig.for_dim(candidates.dim))
    if algorithm == "tpe":
        return Tpe(candidates, config or TpeConfig())
    if algorithm == "toy":
        return ToyAdc(candidates, config or ToyConfig())
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _as_algorithm(algorithm, candidates, config):
    return make_algorithm(algorithm, candidates, config) if isinstance(algorithm, str) else algorithm


def next_point(algorithm, history: CollectedData, candidates: CandidateSet, config=None) -> int:
    """Index of the acquisition maximiser; the smallest index wins ties."""
    if len(history) == 0:
        raise ValueError("history must be non-empty")
    algo = _as_algorithm(algorithm, candidates, config)
    scores, _ = algo.scores(history.indices, history.y)
    return int(np.argmax(scores))


def drive(algo, initial: Sequence[int], n_steps: int, respond: Callable[[int, int], float]):
    indices = [int(i) for i in initial]
    y = [float(respond(t, c)) for t, c in enumerate(indices)]
    partitions = []
    for _ in range(n_steps):
        scores, aux = algo.scores(tuple(indices), np.asarray(y))
        nxt = int(np.argmax(scores))
        if aux is not None:
            partitions.append(aux)
        y.append(float(respond(len(indices), nxt)))
        indices.append(nxt)
    return Trajectory(tuple(indices), tuple(partitions)), np.asarray(y)


def initial_design(n_candidates: int, n_init: int, seed) -> tuple[int, ...]:
    """``n_init`` distinct indices, uniform without replacement, from a Philox stream."""
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    if n_init > n_candidates:
        raise ValueError(f"cannot draw {n_init} distinct initial points from {n_candidates} candidates")
    rng = np.random.Generator(np.random.Philox(seed))
    return tuple(int(i) for i in rng.choice(n_candidates, size=n_init, replace=False))


def run_adc(
    algorithm,
    responses,
    candidates: CandidateSet,
    config=None,
    n_init: int = 10,
    n_steps: int = 50,
    seed=0,
    initial_indices: Sequence[int] | None = None,
) -> tuple[Trajectory, CollectedData]:
    """Run ``n_init`` seeded initial queries followed by ``n_steps`` acquisitions.

    ``responses`` is either a callable ``(step, candidate_index) -> y`` or a
    fixed response vector read in query order.
    """
    if initial_indices is None and n_init + n_steps > candidates.size:
        raise ValueError(f"budget {n_init + n_steps} exceeds the candidate count {candidates.size}")
    algo = _as_algorithm(algorithm, candidates, config)
    initial = tuple(initial_indices) if initial_indices is not None else initial_design(candidates.size, n_init, seed)
    if callable(responses):
        respond = responses
    else:
        fixed = np.asarray(responses, dtype=float)
        if fixed.shape[0] < len(initial) + n_steps:
            raise ValueError("response vector shorter than the budget")
        respond = lambda t, c: fixed[t]  # noqa: E731
    traj, y = drive(algo, initial, n_steps, respond)
    data = CollectedData(traj.indices, y, n_init=len(initial), budget=len(initial) + n_steps)
    return traj, data


def replay_trajectory(algorithm, candidates: CandidateSet, config, initial_indices: Sequence[int], y) -> Trajectory:
    """The trajectory map: rerun the acquisitions reading responses from ``y``."""
    y = np.asarray(y, dtype=float)
    algo = _as_algorithm(algorithm, candidates, config)
    n_steps = y.shape[0] - len(initial_indices)
    if n_steps < 0:
        raise ValueError("response vector shorter than the initial design")
    traj, _ = drive(algo, initial_indices, n_steps, lambda t, c: y[t])
    return traj
