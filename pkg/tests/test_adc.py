import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from postadc.adc import (
    CollectedData,
    DegenerateSplitError,
    GpUcb,
    GpUcbConfig,
    Tpe,
    TpeConfig,
    ToyAdc,
    gp_posterior,
    gpucb_score,
    make_algorithm,
    next_point,
    rbf_kernel,
    replay_trajectory,
    run_adc,
    toy_candidates,
    tpe_partition,
    tpe_score,
)
from postadc.candidates import CandidateSet, make_grid


def dense_posterior(X, y, x, cfg):
    """Plain inverse-based GP posterior, independent of the Cholesky path."""
    def k(a, b):
        return cfg.kernel_variance * math.exp(-np.sum((a - b) ** 2) / (2 * cfg.length_scale**2))

    K = np.array([[k(a, b) for b in X] for a in X])
    kx = np.array([k(a, x) for a in X])
    A = np.linalg.inv(K + cfg.noise_variance * np.eye(len(X)))
    return kx @ A @ y, k(x, x) - kx @ A @ kx


def test_rbf_kernel_values():
    assert rbf_kernel([0.3], [0.3]) == 1.0
    assert rbf_kernel([0.0], [0.1], 1.0, 0.1) == pytest.approx(math.exp(-0.5))
    assert rbf_kernel([0.0], [100.0]) == 0.0


def test_gp_posterior_scalar_case():
    pts = np.array([[0.2]])
    hist = CollectedData((0,), np.array([2.0]), 1, 1)
    mean, var = gp_posterior(hist, pts, [0.2], GpUcbConfig(1.0, 0.1, 1.0, 2.0))
    assert mean == pytest.approx(1.0)
    assert var == pytest.approx(0.5)
    assert gpucb_score(hist, pts, [0.2], GpUcbConfig(1.0, 0.1, 1.0, 2.0)) == pytest.approx(2.41421356237)
    assert gpucb_score(hist, pts, [0.2], GpUcbConfig(1.0, 0.1, 1.0, 1e-300)) == pytest.approx(1.0)


def test_gp_posterior_orthogonal_point():
    pts = np.array([[0.0]])
    hist = CollectedData((0,), np.array([3.0]), 1, 1)
    mean, var = gp_posterior(hist, pts, [50.0], GpUcbConfig())
    assert mean == 0.0 and var == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_gp_posterior_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    cfg = GpUcbConfig(1.3, 0.2, 0.7, 2.0)
    pts = rng.uniform(size=(6, 2))
    y = rng.normal(size=3)
    hist = CollectedData((0, 3, 5), y, 3, 3)
    x = rng.uniform(size=2)
    mean, var = gp_posterior(hist, pts, x, cfg)
    m2, v2 = dense_posterior(pts[[0, 3, 5]], y, x, cfg)
    assert mean == pytest.approx(m2, abs=1e-10)
    assert var == pytest.approx(v2, abs=1e-10)
    assert gpucb_score(hist, pts, x, cfg) == pytest.approx(m2 + 2.0 * math.sqrt(max(v2, 0)), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_gp_mean_is_linear_in_y(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    gp = GpUcb(make_grid(1, 12), GpUcbConfig.for_dim(1))
    prefix = (1, 4, 7, 9)
    y1, y2 = rng.normal(size=4), rng.normal(size=4)
    coef = gp.step(prefix).coef
    np.testing.assert_allclose(coef @ (alpha * y1 + beta * y2), alpha * (coef @ y1) + beta * (coef @ y2), atol=1e-10)


def test_gpucb_scores_match_pointwise_oracle():
    cands = make_grid(1, 16)
    cfg = GpUcbConfig.for_dim(1)
    gp = GpUcb(cands, cfg)
    rng = np.random.default_rng(3)
    prefix, y = (2, 5, 11), rng.normal(size=3)
    scores, _ = gp.scores(prefix, y)
    hist = CollectedData(prefix, y, 3, 3)
    ref = [gpucb_score(hist, cands.points, x, cfg) for x in cands.points]
    np.testing.assert_allclose(scores, ref, atol=1e-10)
    assert next_point("gpucb", hist, cands, cfg) == int(np.argmax(ref))


def test_tpe_partition_examples():
    assert tpe_partition([3, 1, 2], 0.2) == ((0,), (1, 2))
    assert tpe_partition([1, 1], 0.2) == ((0,), (1,))
    assert len(tpe_partition(np.arange(5.0), 0.2)[0]) == 1
    assert len(tpe_partition(np.arange(10.0), 0.2)[0]) == 2
    with pytest.raises(DegenerateSplitError):
        tpe_partition([1.0], 0.2)


def test_tpe_score_analytic():
    pts = np.array([[0.0], [0.1]])
    hist = CollectedData((0, 1), np.array([2.0, 1.0]), 2, 2)
    assert tpe_score(hist, pts, [0.0], TpeConfig(0.2, 0.1)) == pytest.approx(math.exp(0.5))


def test_tpe_score_symmetric_point():
    pts = np.array([[0.4], [0.6]])
    hist = CollectedData((0, 1), np.array([2.0, 1.0]), 2, 2)
    assert tpe_score(hist, pts, [0.5], TpeConfig()) == pytest.approx(1.0)


def test_tpe_score_matches_direct_sum():
    rng = np.random.default_rng(11)
    pts = rng.uniform(size=(6, 1))
    y = rng.normal(size=6)
    cfg = TpeConfig(0.3, 0.15)
    hist = CollectedData(tuple(range(6)), y, 6, 6)
    top = np.argsort(-y)[: math.ceil(0.3 * 6)]
    rest = [i for i in range(6) if i not in top]
    x = np.array([0.42])
    kern = lambda a: math.exp(-np.sum((x - a) ** 2) / (2 * 0.15**2))  # noqa: E731
    g = sum(kern(pts[i]) for i in top) / len(top)
    l = sum(kern(pts[i]) for i in rest) / len(rest)
    assert tpe_score(hist, pts, x, cfg) == pytest.approx(g / l, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_tpe_scores_depend_on_partition_only(seed):
    rng = np.random.default_rng(seed)
    tpe = Tpe(make_grid(1, 16), TpeConfig())
    prefix = tuple(rng.choice(16, 6, replace=False))
    y = rng.normal(size=6)
    top, _ = tpe_partition(y, 0.2)
    y2 = y.copy()
    y2[list(top)] += 5.0  # same ordering between sets, different values
    np.testing.assert_array_equal(tpe.scores(prefix, y)[0], tpe.scores(prefix, y2)[0])


def test_next_point_tie_goes_to_smallest_index():
    cands = CandidateSet(np.array([[0.0], [1.0]]))

    class Flat:
        def scores(self, prefix, y):
            return np.array([1.0, 1.0]), None

    hist = CollectedData((0,), np.array([0.0]), 1, 1)
    assert next_point(Flat(), hist, cands) == 0


def test_run_adc_no_steps_returns_initial_design():
    traj, data = run_adc("gpucb", np.zeros(4), make_grid(1, 10), n_init=4, n_steps=0, seed=7)
    assert len(set(traj.indices)) == 4
    assert len(data) == 4


def test_run_adc_deterministic_and_budget():
    cands = make_grid(1, 64)
    resp = lambda t, c: math.sin(7 * c) + 0.1 * t  # noqa: E731
    a = run_adc("tpe", resp, cands, n_init=10, n_steps=50, seed=3)
    b = run_adc("tpe", resp, cands, n_init=10, n_steps=50, seed=3)
    assert a[0] == b[0]
    assert len(a[0]) == 60
    with pytest.raises(ValueError):
        run_adc("gpucb", resp, make_grid(1, 8), n_init=5, n_steps=5)


@pytest.mark.parametrize("algo", ["gpucb", "tpe"])
def test_replay_reproduces_run(algo):
    cands = make_grid(1, 32)
    rng = np.random.default_rng(5)
    eps = rng.normal(size=20)
    traj, data = run_adc(algo, lambda t, c: eps[t], cands, n_init=5, n_steps=15, seed=1)
    assert replay_trajectory(algo, cands, None, traj.indices[:5], data.y) == traj


def test_toy_trajectories():
    cands = toy_candidates()
    assert replay_trajectory("toy", cands, None, (0,), [-0.3, 1.0]).indices == (0, 1)
    assert replay_trajectory("toy", cands, None, (0,), [0.0, 1.0]).indices == (0, 2)
    with pytest.raises(ValueError):
        ToyAdc(make_grid(1, 4))


def test_make_algorithm_unknown():
    with pytest.raises(ValueError):
        make_algorithm("smac", make_grid(1, 4), None)
