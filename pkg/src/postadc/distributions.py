"""Truncated-normal and randomized selective distributions, p-values and intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .intervals import Interval, IntervalSet

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_SQRT2 = math.sqrt(2.0)

MAX_EXPANSIONS = 200

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class NumericalFailure(ArithmeticError):
    """A tail mass or root could not be resolved in floating point."""


# --------------------------------------------------------------------------- masses


def _mills(x: float) -> float:
    # Phi_bar(x) / phi(x), finite for all x >= 0 and 0 at +inf
    if math.isinf(x):
        return 0.0
    return _SQRT_HALF_PI * float(special.erfcx(x / _SQRT2))


def log_std_mass(alpha: float, beta: float, width: float | None = None) -> float:
    """``log(Phi(beta) - Phi(alpha))`` for ``alpha < beta``.

    ``width`` is ``beta - alpha`` computed from unstandardized endpoints when
    available; it avoids cancellation for narrow intervals in the far tail.
    """
    if width is None or not math.isfinite(width):
        width = beta - alpha
    # standardized endpoints may round together while the true width is positive
    if not (alpha < beta or (width > 0 and alpha == beta)):
        return -math.inf
    if math.isfinite(width) and width * (max(abs(alpha), abs(beta)) + 1.0) < 1.0:
        # narrow piece: the density varies little, so Gauss-Legendre is exact
        # to rounding and avoids differencing two nearly equal tails
        half = 0.5 * width
        mid = alpha + half
        x = mid + half * _GL_NODES
        expo = -0.5 * x * x
        top = float(np.max(expo))
        total = float(np.dot(_GL_WEIGHTS, np.exp(expo - top))) * half
        return top + math.log(total) - _LOG_SQRT_2PI
    if alpha >= 0.0:
        # phi(alpha) * [R(alpha) - exp(-(beta^2 - alpha^2)/2) R(beta)]
        if math.isinf(beta):
            inner = _mills(alpha)
        else:
            inner = _mills(alpha) - math.exp(-0.5 * width * (alpha + beta)) * _mills(beta)
        if not inner > 0.0:
            return -math.inf
        return -0.5 * alpha * alpha - _LOG_SQRT_2PI + math.log(inner)
    if beta <= 0.0:
        return log_std_mass(-beta, -alpha, width)
    mass = 0.5 * (float(special.erf(beta / _SQRT2)) - float(special.erf(alpha / _SQRT2)))
    return math.log(mass) if mass > 0 else -math.inf


def _log_pieces(delta: float, sd: float, pieces) -> float:
    logs = []
    for lo, hi in pieces:
        width = (hi - lo) / sd if math.isfinite(lo) and math.isfinite(hi) else None
        logs.append(log_std_mass((lo - delta) / sd, (hi - delta) / sd, width))
    if not logs:
        return -math.inf
    return float(special.logsumexp(logs))


def _clip(Z: IntervalSet, lo: float, hi: float) -> list[tuple[float, float]]:
    out = []
    for iv in Z:
        a, b = max(iv.lo, lo), min(iv.hi, hi)
        if a < b:
            out.append((a, b))
    return out


def _check(v: float, Z: IntervalSet):
    if not v > 0:
        raise ValueError(f"variance must be positive, got {v}")
    if not Z:
        raise ValueError("truncation set is empty")


def log_tn_mass(delta: float, v: float, Z: IntervalSet) -> float:
    """Log of the N(delta, v) probability of Z."""
    _check(v, Z)
    return _log_pieces(delta, math.sqrt(v), [(iv.lo, iv.hi) for iv in Z])


def tn_cdf(delta: float, v: float, Z: IntervalSet, t: float) -> float:
    """CDF at ``t`` of N(delta, v) truncated to ``Z``."""
    _check(v, Z)
    sd = math.sqrt(v)
    den = _log_pieces(delta, sd, [(iv.lo, iv.hi) for iv in Z])
    if not math.isfinite(den):
        raise NumericalFailure(f"truncated mass underflows (delta={delta}, v={v}, Z={Z})")
    num = _log_pieces(delta, sd, _clip(Z, -math.inf, t))
    return min(1.0, math.exp(num - den))


def tn_sf(delta: float, v: float, Z: IntervalSet, t: float) -> float:
    """Upper tail ``1 - tn_cdf``, evaluated directly so small values keep precision."""
    _check(v, Z)
    sd = math.sqrt(v)
    den = _log_pieces(delta, sd, [(iv.lo, iv.hi) for iv in Z])
    if not math.isfinite(den):
        raise NumericalFailure(f"truncated mass underflows (delta={delta}, v={v}, Z={Z})")
    num = _log_pieces(delta, sd, _clip(Z, t, math.inf))
    return min(1.0, math.exp(num - den))


def tn_ppf(delta: float, v: float, Z: IntervalSet, q: float) -> float:
    """Inverse CDF of the truncated normal (used for sampling in checks)."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    lo, hi = Z.lower, Z.upper
    sd = math.sqrt(v)
    a = lo if math.isfinite(lo) else delta - 40 * sd
    b = hi if math.isfinite(hi) else delta + 40 * sd
    a = min(a, b - 1e-300)
    while tn_cdf(delta, v, Z, a) > q:
        a -= b - a
    while tn_cdf(delta, v, Z, b) < q:
        b += b - a
    return optimize.brentq(lambda x: tn_cdf(delta, v, Z, x) - q, a, b, xtol=1e-12 * sd, rtol=1e-15)


# --------------------------------------------------------------------------- p-values


def _require_inside(t_obs: float, Z: IntervalSet):
    if t_obs not in Z:
        raise ValueError(f"t_obs={t_obs} lies outside the truncation set {Z}")


def selective_p(t_obs: float, v: float, Z: IntervalSet) -> float:
    """One-sided p-value for ``Delta <= 0`` against ``Delta > 0``."""
    _require_inside(t_obs, Z)
    return float(np.clip(tn_sf(0.0, v, Z, t_obs), 0.0, 1.0))


def selective_p_two_sided(t_obs: float, v: float, Z: IntervalSet) -> float:
    _require_inside(t_obs, Z)
    lower = tn_cdf(0.0, v, Z, t_obs)
    upper = tn_sf(0.0, v, Z, t_obs)
    return float(np.clip(2.0 * min(lower, upper), 0.0, 1.0))


# --------------------------------------------------------------------------- intervals


def invert_cdf_in_delta(G, t_obs: float, v: float, level: float, xtol_scale: float = 1e-8) -> float:
    """Solve ``G(Delta) = level`` for a CDF decreasing in ``Delta``.

    The bracket starts at ``t_obs +- sqrt(v)`` and doubles up to 200 times;
    returns ``-inf``/``+inf`` when no sign change is found.
    """
    sd = math.sqrt(v)

    def f(delta):
        return G(delta) - level

    lo, hi = t_obs - sd, t_obs + sd
    step = sd
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(MAX_EXPANSIONS):
        if f_lo >= 0.0 >= f_hi:
            break
        step *= 2.0
        if f_lo < 0.0:
            hi, f_hi = lo, f_lo
            lo = t_obs - step
            f_lo = f(lo)
        else:
            lo, f_lo = hi, f_hi
            hi = t_obs + step
            f_hi = f(hi)
    else:
        return -math.inf if f_lo < 0.0 else math.inf
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    return optimize.brentq(f, lo, hi, xtol=xtol_scale * sd, rtol=4 * np.finfo(float).eps, maxiter=500)


def selective_ci(t_obs: float, v: float, Z: IntervalSet, alpha: float) -> tuple[float, float]:
    """Equal-tailed interval ``{Delta : alpha/2 <= G_Delta(t_obs) <= 1 - alpha/2}``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    _require_inside(t_obs, Z)

    def G(delta):
        return tn_cdf(delta, v, Z, t_obs)

    lo = invert_cdf_in_delta(G, t_obs, v, 1.0 - alpha / 2)
    hi = invert_cdf_in_delta(G, t_obs, v, alpha / 2)
    return lo, hi


def selective_ci_lower(t_obs: float, v: float, Z: IntervalSet, alpha: float) -> tuple[float, float]:
    """One-sided lower bound ``{Delta : G_Delta(t_obs) <= 1 - alpha}``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    _require_inside(t_obs, Z)
    lo = invert_cdf_in_delta(lambda d: tn_cdf(d, v, Z, t_obs), t_obs, v, 1.0 - alpha)
    return lo, math.inf


# --------------------------------------------------------------------------- results and baselines


@dataclass
class SelectiveResult:
    method: str
    p_value: float
    p_two_sided: float
    ci: tuple[float, float]
    t_obs: float
    v: float
    Z: IntervalSet | None = None
    ci_lower: tuple[float, float] | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ci_length(self) -> float:
        return self.ci[1] - self.ci[0]

    def covers(self, delta: float) -> bool:
        return self.ci[0] <= delta <= self.ci[1]


def post_adc_inference(t_obs: float, v: float, Z: IntervalSet, alpha_ci: float = 0.10,
                       method: str = "post_adc") -> SelectiveResult:
    return SelectiveResult(
        method=method,
        p_value=selective_p(t_obs, v, Z),
        p_two_sided=selective_p_two_sided(t_obs, v, Z),
        ci=selective_ci(t_obs, v, Z, alpha_ci),
        t_obs=t_obs,
        v=v,
        Z=Z,
        ci_lower=selective_ci_lower(t_obs, v, Z, alpha_ci),
    )


def naive_inference(t_obs: float, v: float, alpha: float) -> SelectiveResult:
    """Z-test and Wald interval that ignore selection."""
    sd = math.sqrt(v)
    z = float(special.ndtri(1.0 - alpha / 2))
    p = float(special.ndtr(-t_obs / sd))
    p2 = float(min(1.0, 2.0 * special.ndtr(-abs(t_obs) / sd)))
    return SelectiveResult("naive", p, p2, (t_obs - z * sd, t_obs + z * sd), t_obs, v,
                           ci_lower=(t_obs - float(special.ndtri(1.0 - alpha)) * sd, math.inf))


def bonferroni_log_correction(n_candidates: int, n_steps: int, window_count_base: float = 3.0) -> float:
    """``log(M^n_steps * base^M)``."""
    return n_steps * math.log(n_candidates) + n_candidates * math.log(window_count_base)


def bonferroni_p(p_naive: float, n_candidates: int, n_steps: int, window_count_base: float = 3.0) -> float:
    if p_naive < 0:
        raise ValueError("p-value must be non-negative")
    if p_naive == 0.0:
        return 0.0
    log_p = math.log(p_naive) + bonferroni_log_correction(n_candidates, n_steps, window_count_base)
    return 1.0 if log_p >= 0.0 else math.exp(log_p)


def bonferroni_inference(t_obs: float, v: float, alpha: float, n_candidates: int, n_steps: int,
                         window_count_base: float = 3.0) -> SelectiveResult:
    """Naive statistic with the trajectory-and-region count correction."""
    sd = math.sqrt(v)
    log_corr = bonferroni_log_correction(n_candidates, n_steps, window_count_base)
    z = -float(special.ndtri_exp(math.log(alpha / 2) - log_corr))
    z1 = -float(special.ndtri_exp(math.log(alpha) - log_corr))
    p = bonferroni_p(float(special.ndtr(-t_obs / sd)), n_candidates, n_steps, window_count_base)
    p2 = bonferroni_p(float(min(1.0, 2.0 * special.ndtr(-abs(t_obs) / sd))), n_candidates, n_steps,
                      window_count_base)
    return SelectiveResult("bonferroni", p, p2, (t_obs - z * sd, t_obs + z * sd), t_obs, v,
                           ci_lower=(t_obs - z1 * sd, math.inf), diagnostics={"log_correction": log_corr})


# --------------------------------------------------------------------------- randomized


def _log_weight_piece(u: float, lo: float, hi: float, tau_eta: float) -> float:
    # log P(u + R in [lo, hi]) with R ~ N(0, tau_eta^2)
    width = (hi - lo) / tau_eta if math.isfinite(lo) and math.isfinite(hi) else None
    return log_std_mass((lo - u) / tau_eta, (hi - u) / tau_eta, width)


def _log_integrand(u, delta, v, lo, hi, tau_eta):
    return -0.5 * (u - delta) ** 2 / v + _log_weight_piece(u, lo, hi, tau_eta)


def _piece_mode(delta: float, v: float, lo: float, hi: float, tau_eta: float) -> float:
    # the integrand is log-concave; its mode lies between delta and the piece
    left = min(delta, lo) if math.isfinite(lo) else delta
    right = max(delta, hi) if math.isfinite(hi) else delta
    if math.isfinite(lo) and not math.isfinite(hi):
        left = min(delta, lo)
        right = max(delta, lo + 40 * tau_eta)
    if math.isfinite(hi) and not math.isfinite(lo):
        left = min(delta, hi - 40 * tau_eta)
        right = max(delta, hi)
    if not right > left:
        return left
    res = optimize.minimize_scalar(
        lambda u: -_log_integrand(u, delta, v, lo, hi, tau_eta),
        bounds=(left, right),
        method="bounded",
        options={"xatol": 1e-9 * min(math.sqrt(v), tau_eta) + 1e-12 * max(abs(left), abs(right))},
    )
    return float(res.x)


def _log_rnd_mass(delta: float, v: float, tau_eta: float, Z: IntervalSet, lower: float, upper: float) -> float:
    """Log of the integral of ``phi(u; delta, v) w(u)`` over ``[lower, upper]`` (up to a constant)."""
    sd = math.sqrt(v)
    logs = []
    for iv in Z:
        mode = _piece_mode(delta, v, iv.lo, iv.hi, tau_eta)
        peak = _log_integrand(mode, delta, v, iv.lo, iv.hi, tau_eta)
        half = 12.0 * sd
        a, b = max(mode - half, lower), min(mode + half, upper)
        if not a < b:
            continue
        pts = [p for p in (mode, iv.lo, iv.hi, iv.lo + tau_eta, iv.hi - tau_eta, mode - sd, mode + sd)
               if math.isfinite(p) and a < p < b]
        val, _ = integrate.quad(
            lambda u: math.exp(_log_integrand(u, delta, v, iv.lo, iv.hi, tau_eta) - peak),
            a, b, points=sorted(set(pts)) or None, limit=400, epsabs=1e-13, epsrel=1e-10,
        )
        if val > 0:
            logs.append(peak + math.log(val))
    return float(special.logsumexp(logs)) if logs else -math.inf


def randomized_selective_cdf(delta: float, v: float, tau2: float, eta_norm2: float, Z_tilde: IntervalSet,
                             t: float) -> float:
    """``P(Z <= t | Z + R in Z_tilde)`` for ``Z ~ N(delta, v)``, ``R ~ N(0, tau2 |eta|^2)``."""
    _check(v, Z_tilde)
    if not tau2 > 0:
        return tn_cdf(delta, v, Z_tilde, t)
    tau_eta = math.sqrt(tau2 * eta_norm2)
    den = _log_rnd_mass(delta, v, tau_eta, Z_tilde, -math.inf, math.inf)
    if not math.isfinite(den):
        raise NumericalFailure("randomized selection mass underflows")
    num = _log_rnd_mass(delta, v, tau_eta, Z_tilde, -math.inf, t)
    return float(np.clip(math.exp(num - den), 0.0, 1.0))


def randomized_selective_sf(delta: float, v: float, tau2: float, eta_norm2: float, Z_tilde: IntervalSet,
                            t: float) -> float:
    _check(v, Z_tilde)
    if not tau2 > 0:
        return tn_sf(delta, v, Z_tilde, t)
    tau_eta = math.sqrt(tau2 * eta_norm2)
    den = _log_rnd_mass(delta, v, tau_eta, Z_tilde, -math.inf, math.inf)
    if not math.isfinite(den):
        raise NumericalFailure("randomized selection mass underflows")
    num = _log_rnd_mass(delta, v, tau_eta, Z_tilde, t, math.inf)
    return float(np.clip(math.exp(num - den), 0.0, 1.0))


def randomized_inference(t_obs: float, v: float, tau2: float, eta_norm2: float, Z_tilde: IntervalSet,
                         alpha_ci: float = 0.10) -> SelectiveResult:
    """p-value and equal-tailed interval from the randomized selective CDF at ``t_obs = eta^T y``."""

    def G(delta):
        return randomized_selective_cdf(delta, v, tau2, eta_norm2, Z_tilde, t_obs)

    p = randomized_selective_sf(0.0, v, tau2, eta_norm2, Z_tilde, t_obs)
    g0 = G(0.0)
    ci = (invert_cdf_in_delta(G, t_obs, v, 1.0 - alpha_ci / 2), invert_cdf_in_delta(G, t_obs, v, alpha_ci / 2))
    return SelectiveResult(
        method="randomized",
        p_value=p,
        p_two_sided=float(np.clip(2.0 * min(g0, p), 0.0, 1.0)),
        ci=ci,
        t_obs=t_obs,
        v=v,
        Z=Z_tilde,
        diagnostics={"tau2": tau2},
    )


__all__ = [
    "Interval",
    "IntervalSet",
    "NumericalFailure",
    "SelectiveResult",
    "bonferroni_inference",
    "bonferroni_p",
    "log_std_mass",
    "naive_inference",
    "post_adc_inference",
    "randomized_inference",
    "randomized_selective_cdf",
    "randomized_selective_sf",
    "selective_ci",
    "selective_ci_lower",
    "selective_p",
    "selective_p_two_sided",
    "tn_cdf",
    "tn_ppf",
    "tn_sf",
]
