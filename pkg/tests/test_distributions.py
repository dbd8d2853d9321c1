import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from postadc.distributions import (
    bonferroni_inference,
    bonferroni_p,
    invert_cdf_in_delta,
    log_std_mass,
    naive_inference,
    post_adc_inference,
    randomized_inference,
    randomized_selective_cdf,
    selective_ci,
    selective_ci_lower,
    selective_p,
    selective_p_two_sided,
    tn_cdf,
    tn_ppf,
    tn_sf,
)
from postadc.intervals import IntervalSet

inf = math.inf
R = IntervalSet.real_line()

# 30-digit mpmath values, frozen
SF_RATIO_1_OVER_HALF = 0.51421702067948125
CDF_HALF_LINE_AT_2 = 0.9544997361036416
CDF_10_11_AT_10_5 = 0.9943568366344190
Z95 = 1.6448536269514729


def quad_cdf(delta, v, pieces, t):
    sd = math.sqrt(v)
    dens = lambda u: math.exp(-0.5 * ((u - delta) / sd) ** 2)  # noqa: E731
    num = sum(integrate.quad(dens, lo, min(hi, t), epsabs=0, epsrel=1e-12)[0] for lo, hi in pieces if lo < t)
    den = sum(integrate.quad(dens, lo, hi, epsabs=0, epsrel=1e-12)[0] for lo, hi in pieces)
    return num / den


def test_untruncated_median():
    assert tn_cdf(0, 1, R, 0) == pytest.approx(0.5, abs=1e-15)


def test_half_line_matches_quadrature():
    Z = IntervalSet([(0, inf)])
    assert tn_cdf(0, 1, Z, 2.0) == pytest.approx(CDF_HALF_LINE_AT_2, abs=1e-14)
    for t in (0.01, 0.3, 1.0, 3.7, 6.0):
        assert tn_cdf(0, 1, Z, t) == pytest.approx(quad_cdf(0, 1, [(0, inf)], t), abs=1e-8)


def test_far_tail_interval():
    Z = IntervalSet([(10, 11)])
    assert tn_cdf(0, 1, Z, 10.5) == pytest.approx(CDF_10_11_AT_10_5, rel=1e-10)


@pytest.mark.parametrize("gap", [20.0, 30.0, 40.0])
def test_far_tail_ratios_stay_accurate(gap):
    # Pr(X > t + h | X > t) deep in the tail
    Z = IntervalSet([(gap, inf)])
    sf = tn_sf(0, 1, Z, gap + 0.01)
    ref = math.exp(stats.norm.logsf(gap + 0.01) - stats.norm.logsf(gap))
    assert sf == pytest.approx(ref, rel=1e-9)


def test_narrow_interval_near_zero():
    Z = IntervalSet([(-1e-7, 1e-7)])
    assert tn_cdf(0, 1, Z, 0.0) == pytest.approx(0.5, abs=1e-12)


def test_log_std_mass_symmetry():
    assert log_std_mass(-inf, inf) == 0.0
    assert log_std_mass(1, 2) == pytest.approx(log_std_mass(-2, -1), rel=1e-14)
    assert log_std_mass(0, inf) == pytest.approx(math.log(0.5))


def test_selective_p_examples():
    assert selective_p(Z95, 1, R) == pytest.approx(0.05, abs=1e-12)
    assert selective_p(1.0, 1, IntervalSet([(0.5, inf)])) == pytest.approx(SF_RATIO_1_OVER_HALF, rel=1e-12)
    assert selective_p(0.5, 1, IntervalSet([(0.5, 3)])) == 1.0
    with pytest.raises(ValueError):
        selective_p(0.0, 1, IntervalSet([(0.5, inf)]))


def test_two_sided_examples():
    assert selective_p_two_sided(0.0, 1, R) == pytest.approx(1.0)
    assert selective_p_two_sided(1.959963984540054, 1, R) == pytest.approx(0.05, abs=1e-12)
    q = float(stats.norm.ppf(0.975))
    assert selective_p_two_sided(q, 1, R) == pytest.approx(0.05)


def test_ci_untruncated():
    lo, hi = selective_ci(0.7, 1.0, R, 0.10)
    assert (lo, hi) == pytest.approx((0.7 - Z95, 0.7 + Z95), abs=1e-7)
    lo1, _ = selective_ci_lower(0.7, 4.0, R, 0.05)
    assert lo1 == pytest.approx(0.7 - 2 * Z95, abs=1e-7)


def test_ci_half_line_self_consistent():
    Z = IntervalSet([(0, inf)])
    lo, hi = selective_ci(2.0, 1.0, Z, 0.10)
    assert quad_cdf(lo, 1, [(0, inf)], 2.0) == pytest.approx(0.95, abs=1e-6)
    assert quad_cdf(hi, 1, [(0, inf)], 2.0) == pytest.approx(0.05, abs=1e-6)
    lo1, up = selective_ci_lower(2.0, 1.0, Z, 0.05)
    assert up == inf
    assert quad_cdf(lo1, 1, [(0, inf)], 2.0) == pytest.approx(0.95, abs=1e-6)
    # a one-sided bound at alpha is the two-sided lower end at 2 alpha
    assert lo1 >= selective_ci(2.0, 1.0, Z, 0.05)[0]
    assert lo1 == pytest.approx(selective_ci(2.0, 1.0, Z, 0.10)[0], abs=1e-7)


def test_ci_nests_as_alpha_grows():
    Z = IntervalSet([(-0.5, 3.0)])
    widths = [np.diff(selective_ci(1.0, 1.0, Z, a))[0] for a in (0.05, 0.2, 0.5, 0.9)]
    assert all(w1 > w2 for w1, w2 in zip(widths, widths[1:]))


def test_ci_near_edge_is_very_long():
    # t at the very edge of a one-sided set pushes the lower end out to about -log(20)/t
    lo, hi = selective_ci(1e-9, 1.0, IntervalSet([(0, inf)]), 0.10)
    assert lo < -1e8 and math.isfinite(hi)


def test_bracket_failure_reports_unbounded_end():
    # a CDF that never reaches the level in either direction
    assert invert_cdf_in_delta(lambda d: 0.5, 0.0, 1.0, 0.95) == -inf
    assert invert_cdf_in_delta(lambda d: 0.5, 0.0, 1.0, 0.05) == inf


pieces_strategy = (st.lists(st.floats(-6, 6), min_size=2, max_size=6, unique=True).map(sorted)
                   .filter(lambda e: min(np.diff(e)) > 1e-3))


def _set_from(edges):
    return IntervalSet([(edges[i], edges[i + 1]) for i in range(0, len(edges) - 1, 2)])


@settings(max_examples=60, deadline=None)
@given(pieces_strategy, st.floats(-3, 3), st.floats(0.2, 4), st.floats(0, 1))
def test_cdf_matches_quadrature_and_edges(edges, delta, v, frac):
    Z = _set_from(edges)
    if Z.upper - Z.lower < 1e-3:
        return
    t = Z.lower + frac * (Z.upper - Z.lower)
    ref = quad_cdf(delta, v, [(iv.lo, iv.hi) for iv in Z], t)
    assert tn_cdf(delta, v, Z, t) == pytest.approx(ref, abs=1e-8)
    assert tn_cdf(delta, v, Z, Z.upper) == pytest.approx(1.0, abs=1e-12)
    assert tn_cdf(delta, v, Z, Z.lower) == pytest.approx(0.0, abs=1e-12)
    assert tn_cdf(delta, v, Z, t) + tn_sf(delta, v, Z, t) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(pieces_strategy, st.floats(-3, 3), st.floats(0.2, 4), st.floats(0.05, 0.95))
def test_translation_equivariance(edges, delta, v, frac):
    Z = _set_from(edges)
    t = Z.lower + frac * (Z.upper - Z.lower)
    assert tn_cdf(delta, v, Z, t) == pytest.approx(tn_cdf(0, v, Z.shift(-delta), t - delta), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(pieces_strategy, st.floats(0.2, 4), st.floats(0.05, 0.95))
def test_cdf_decreasing_in_delta(edges, v, frac):
    Z = _set_from(edges)
    if Z.upper - Z.lower < 1e-2:
        return
    t = Z.lower + frac * (Z.upper - Z.lower)
    if t not in Z or Z.distance_to_boundary(t) < 1e-3:
        return
    g = [tn_cdf(d, v, Z, t) for d in np.linspace(-3, 3, 25)]
    assert all(a >= b for a, b in zip(g, g[1:]))
    assert g[0] > g[-1]


@settings(max_examples=40, deadline=None)
@given(pieces_strategy, st.floats(0.2, 4), st.floats(0.02, 0.98), st.sampled_from([0.05, 0.1, 0.3]))
def test_ci_test_duality(edges, v, frac, alpha):
    Z = _set_from(edges)
    if Z.upper - Z.lower < 1e-2:
        return
    t = Z.lower + frac * (Z.upper - Z.lower)
    if t not in Z:
        return
    p2 = selective_p_two_sided(t, v, Z)
    if abs(p2 - alpha) < 1e-6:
        return
    lo, hi = selective_ci(t, v, Z, alpha)
    assert (lo <= 0 <= hi) == (p2 >= alpha)


def test_ppf_inverts_cdf():
    Z = IntervalSet([(-1, 0.5), (2, 4)])
    for q in (0.01, 0.3, 0.7, 0.99):
        assert tn_cdf(0.3, 1.5, Z, tn_ppf(0.3, 1.5, Z, q)) == pytest.approx(q, abs=1e-9)


def test_probability_integral_transform():
    Z = IntervalSet([(-0.3, 1.0), (2.0, inf)])
    rng = np.random.default_rng(2)
    t = [tn_ppf(0.0, 1.0, Z, q) for q in rng.uniform(size=10_000)]
    p = [selective_p(x, 1.0, Z) for x in t if x in Z]
    assert stats.kstest(p, "uniform").pvalue > 0.01


def test_naive():
    r = naive_inference(0.0, 1.0, 0.10)
    assert r.p_value == 0.5
    assert naive_inference(Z95, 1.0, 0.1).p_value == pytest.approx(0.05)
    assert r.ci_length == pytest.approx(2 * Z95 * 1.0)
    assert r.covers(0.0)


def test_bonferroni_p_examples():
    assert bonferroni_p(1e-10, 4, 3) == pytest.approx(5.184e-7, rel=1e-12)
    assert bonferroni_p(0.01, 1024, 50) == 1.0
    assert bonferroni_p(0.0, 64, 15) == 0.0


def test_bonferroni_interval_widens():
    b = bonferroni_inference(3.0, 1.0, 0.10, 64, 15)
    n = naive_inference(3.0, 1.0, 0.10)
    assert b.ci_length > n.ci_length
    # corrected two-sided level is alpha / (M^n 3^M)
    z = b.ci[1] - 3.0
    log_tail = stats.norm.logsf(z)
    assert log_tail == pytest.approx(math.log(0.05) - (15 * math.log(64) + 64 * math.log(3)), rel=1e-9)


def test_post_adc_result_fields():
    res = post_adc_inference(1.0, 1.0, IntervalSet([(0, inf)]), 0.1)
    assert res.method == "post_adc" and res.ci_lower[1] == inf
    assert res.ci[0] < 1.0 < res.ci[1]


def test_randomized_untruncated_is_normal():
    for t in (-1.0, 0.3, 2.0):
        assert randomized_selective_cdf(0.2, 1.0, 0.5, 2.0, R, t) == pytest.approx(stats.norm.cdf(t - 0.2), abs=1e-9)


def test_randomized_small_noise_recovers_hard_truncation():
    Z = IntervalSet([(0.5, 3.0)])
    for t in (0.8, 1.5, 2.5):
        assert randomized_selective_cdf(0.0, 1.0, 1e-8, 1.0, Z, t) == pytest.approx(tn_cdf(0, 1, Z, t), abs=1e-4)


def test_randomized_matches_monte_carlo():
    Z = IntervalSet([(0.0, 1.0), (2.0, inf)])
    delta, v, tau2, eta2, t = 0.4, 1.0, 0.5, 2.0, 1.2
    rng = np.random.default_rng(123)
    n = 1_000_000
    u = rng.normal(delta, math.sqrt(v), n)
    r = rng.normal(0, math.sqrt(tau2 * eta2), n)
    s = u + r
    keep = ((s >= 0) & (s <= 1)) | (s >= 2)
    est = np.mean(u[keep] <= t)
    se = math.sqrt(est * (1 - est) / keep.sum())
    assert abs(randomized_selective_cdf(delta, v, tau2, eta2, Z, t) - est) < 3 * se


def test_randomized_inference_ci_brackets_t():
    res = randomized_inference(1.5, 1.0, 0.5, 1.0, IntervalSet([(1.0, inf)]), 0.1)
    assert res.ci[0] < 1.5 < res.ci[1]
    assert 0 <= res.p_value <= 1
    # wider set than hard truncation allows, so the interval is finite
    assert math.isfinite(res.ci[0])
