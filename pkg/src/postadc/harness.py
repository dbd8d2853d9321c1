"""Monte Carlo replicates, sweeps, aggregation and real-data bootstrap."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .adc import FactorizationError, GpUcbConfig, TpeConfig, initial_design, make_algorithm
from .candidates import CandidateSet, make_grid
from .distributions import NumericalFailure
from .geometry import InconsistentEventError
from .objectives import ObjectiveSpec, synth_objective
from .pipeline import METHODS, analyze, interval_bounds, observe, randomized_pipeline, rule_params_for
from .targets import RULES, DegenerateSelectionError

REPLICATE_COLUMNS = (
    "config_id", "replicate_id", "method", "p_value", "ci_lo", "ci_hi", "ci_length", "reject", "cover",
    "delta_true", "z_lo", "z_hi", "skipped", "skip_reason", "wall_ms",
)
AGGREGATE_COLUMNS = (
    "method", "n_effective", "n_skipped", "reject_rate", "reject_se", "coverage_rate", "coverage_se",
    "ci_length_median", "ci_length_q90",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one Monte Carlo configuration needs; all randomness flows from ``master_seed``."""

    algorithm: str = "gpucb"
    rule: str = "high_low_region"
    family: str = "constant_zero"
    a: float = 0.0
    d: int = 1
    m_per_axis: int = 64
    n_init: int = 5
    n_steps: int = 15
    sigma2: float = 1.0
    alpha: float = 0.05
    ci_alpha: float = 0.10
    kappa: float = 2.0
    length_scale: float | None = None  # default 0.1 * sqrt(d)
    kernel_variance: float = 1.0
    gamma: float = 0.2
    bandwidth: float = 0.1
    side: float | None = None  # default 0.2 ** (1 / d)
    top_n: int = 1
    tau2: float = 0.0
    replicates: int = 100
    master_seed: int = 0
    methods: tuple[str, ...] = ("post_adc", "naive", "bonferroni")
    data_path: str | None = None
    feature_columns: tuple[str, ...] = ()
    response_column: str | None = None
    max_candidates: int = 1024
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.algorithm not in ("gpucb", "tpe"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected gpucb or tpe")
        if self.rule not in RULES:
            raise ValueError(f"unknown target rule {self.rule!r}; expected one of {RULES}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.n_init < 1 or self.n_steps < 0:
            raise ValueError("need n_init >= 1 and n_steps >= 0")
        if not 0 < self.alpha < 1 or not 0 < self.ci_alpha < 1:
            raise ValueError("alpha and ci_alpha must lie in (0, 1)")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.tau2 < 0:
            raise ValueError("tau2 must be non-negative")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if "randomized" in self.methods and not self.tau2 > 0:
            raise ValueError("the randomized method needs tau2 > 0")
        if self.data_path is None and self.n_init + self.n_steps > self.m_per_axis**self.d:
            raise ValueError("n_init + n_steps exceeds the candidate count")
        ObjectiveSpec(self.family, self.a, self.d)

    def adc_config(self):
        if self.algorithm == "gpucb":
            ls = self.length_scale if self.length_scale is not None else 0.1 * math.sqrt(self.d)
            return GpUcbConfig(self.kernel_variance, ls, self.sigma2, self.kappa)
        if self.algorithm == "tpe":
            return TpeConfig(self.gamma, self.bandwidth)
        raise ValueError(f"unknown algorithm {self.algorithm!r}")

    def rule_params(self) -> dict:
        gp = self.adc_config() if self.algorithm == "gpucb" else None
        return rule_params_for(self.rule, self.d, self.side, self.top_n, gp_config=gp)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class MethodRow:
    method: str
    p_value: float = math.nan
    ci_lo: float = math.nan
    ci_hi: float = math.nan
    reject: bool | None = None
    cover: bool | None = None
    delta_true: float = math.nan
    z_lo: float = math.nan
    z_hi: float = math.nan
    skipped: bool = False
    skip_reason: str = ""
    wall_ms: float | None = None

    @property
    def ci_length(self) -> float:
        return self.ci_hi - self.ci_lo


@dataclass
class ReplicateRecord:
    replicate_id: int
    rows: list[MethodRow] = field(default_factory=list)

    def row(self, method: str) -> MethodRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


# --------------------------------------------------------------------------- seeding


def replicate_streams(master_seed: int, replicate_id: int) -> tuple[int, np.random.Generator, np.random.Generator,
                                                                      np.random.Generator]:
    """Independent streams for (initial design, noise, randomization, bootstrap rows).

    Derived from ``(master_seed, replicate_id)`` alone, so any worker layout
    reproduces the same draws.
    """
    ss = np.random.SeedSequence([int(master_seed), int(replicate_id)])
    init_ss, noise_ss, omega_ss, rows_ss = ss.spawn(4)
    init_seed = int(init_ss.generate_state(1, np.uint64)[0])
    gens = [np.random.Generator(np.random.Philox(s)) for s in (noise_ss, omega_ss, rows_ss)]
    return init_seed, gens[0], gens[1], gens[2]


# --------------------------------------------------------------------------- real data


@dataclass
class RealData:
    candidates: CandidateSet
    responses: np.ndarray  # one per retained row
    row_candidate: np.ndarray  # candidate index of each retained row
    rows_by_candidate: tuple[np.ndarray, ...]


def load_real_csv(path, feature_columns: Sequence[str], response_column: str, max_candidates: int = 1024,
                  seed: int = 0) -> RealData:
    """Read a numeric CSV, min-max scale the chosen features, deduplicate rows
    into candidates and subsample ``max_candidates`` of them by ``seed``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    missing = [c for c in list(feature_columns) + [response_column] if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    if not feature_columns:
        raise ValueError("at least one feature column is required")
    cols = [header.index(c) for c in feature_columns]
    rcol = header.index(response_column)
    try:
        X = np.array([[float(r[j]) for j in cols] for r in rows])
        y = np.array([float(r[rcol]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: non-numeric or missing cell ({exc})") from exc
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError(f"{path}: non-finite values")
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    X = (X - lo) / span
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    keep = np.arange(uniq.shape[0])
    if uniq.shape[0] > max_candidates:
        rng = np.random.Generator(np.random.Philox(seed))
        keep = np.sort(rng.choice(uniq.shape[0], size=max_candidates, replace=False))
    remap = np.full(uniq.shape[0], -1)
    remap[keep] = np.arange(keep.size)
    row_cand = remap[inverse]
    mask = row_cand >= 0
    row_cand, y = row_cand[mask], y[mask]
    by_cand = tuple(np.flatnonzero(row_cand == k) for k in range(keep.size))
    return RealData(CandidateSet(np.clip(uniq[keep], 0.0, 1.0)), y, row_cand, by_cand)


def _bootstrap_responder(data: RealData, rng: np.random.Generator):
    # a queried candidate reads one of its stored rows; rows are used without
    # replacement within a replicate until a candidate runs out
    used: dict[int, set] = {}

    def respond(t: int, c: int) -> float:
        rows = data.rows_by_candidate[c]
        taken = used.setdefault(c, set())
        free = [r for r in rows if r not in taken] or list(rows)
        r = int(free[int(rng.integers(len(free)))])
        taken.add(r)
        return float(data.responses[r])

    return respond


# --------------------------------------------------------------------------- replicates


_SKIPPABLE = (DegenerateSelectionError, NumericalFailure, InconsistentEventError, FactorizationError)


def _candidates(config: ExperimentConfig, data: RealData | None):
    if data is not None:
        return data.candidates, None
    cands = make_grid(config.d, config.m_per_axis)
    return cands, synth_objective(ObjectiveSpec(config.family, config.a, config.d), cands)


def _row_from(method, res, alpha, delta_true, Z=None) -> MethodRow:
    z_lo, z_hi = interval_bounds(Z if Z is not None else res.Z)
    cover = None if math.isnan(delta_true) else bool(res.covers(delta_true))
    return MethodRow(method, res.p_value, res.ci[0], res.ci[1], bool(res.p_value <= alpha), cover, delta_true,
                     z_lo, z_hi)


def _replicate(config: ExperimentConfig, replicate_id: int, data: RealData | None = None,
               candidates=None, mu=None, keep: dict | None = None) -> ReplicateRecord:
    # ``keep`` (optional) receives the observed event and analysis objects
    if candidates is None:
        candidates, mu = _candidates(config, data)
    init_seed, noise_rng, omega_rng, rows_rng = replicate_streams(config.master_seed, replicate_id)
    N = config.n_init + config.n_steps
    if N > candidates.size:
        raise ValueError("n_init + n_steps exceeds the candidate count")
    initial = initial_design(candidates.size, config.n_init, init_seed)
    eps = noise_rng.normal(0.0, math.sqrt(config.sigma2), N)
    omega = omega_rng.normal(0.0, math.sqrt(config.tau2), N) if config.tau2 > 0 else np.zeros(N)
    if data is None:
        respond = lambda t, c: mu[c] + eps[t]  # noqa: E731
    else:
        respond = _bootstrap_responder(data, rows_rng)

    def true_effect(event):
        if mu is None:
            return math.nan
        return float(event.selection.eta @ mu[list(event.trajectory.indices)])

    record = ReplicateRecord(replicate_id)
    plain = [m for m in config.methods if m != "randomized"]
    params = config.rule_params()
    if plain:
        t0 = time.perf_counter()
        try:
            model = make_algorithm(config.algorithm, candidates, config.adc_config())
            event = observe(model, initial, config.n_steps, respond, config.rule, params)
            analysis = analyze(event, config.sigma2, plain, config.ci_alpha)
            if keep is not None:
                keep.update(event=event, analysis=analysis)
        except _SKIPPABLE as exc:
            if keep is not None:
                keep["error"] = exc
            reason = f"{type(exc).__name__}: {exc}"
            record.rows.extend(MethodRow(m, skipped=True, skip_reason=reason) for m in plain)
        else:
            delta = true_effect(event)
            ms = (time.perf_counter() - t0) * 1e3 if config.timing else None
            for m in plain:
                if m in analysis.failures:
                    record.rows.append(MethodRow(m, delta_true=delta, skipped=True,
                                                 skip_reason=analysis.failures[m]))
                else:
                    row = _row_from(m, analysis.results[m], config.alpha, delta, analysis.sets.get(m))
                    row.wall_ms = ms
                    record.rows.append(row)
    if "randomized" in config.methods:
        t0 = time.perf_counter()
        if data is not None:  # the bootstrap stream is consumed in query order; restart it
            _, _, _, rows_rng = replicate_streams(config.master_seed, replicate_id)
            respond = _bootstrap_responder(data, rows_rng)
        try:
            model = make_algorithm(config.algorithm, candidates, config.adc_config())
            out = randomized_pipeline(model, initial, config.n_steps, respond, omega, config.rule, params,
                                      config.sigma2, config.tau2, config.ci_alpha)
        except _SKIPPABLE as exc:
            record.rows.append(MethodRow("randomized", skipped=True, skip_reason=f"{type(exc).__name__}: {exc}"))
        else:
            if keep is not None:
                keep["randomized"] = out
            row = _row_from("randomized", out.result, config.alpha, true_effect(out.event), out.Z_tilde)
            row.wall_ms = (time.perf_counter() - t0) * 1e3 if config.timing else None
            record.rows.append(row)
    return record


def run_replicate(config: ExperimentConfig, replicate_id: int, keep: dict | None = None) -> ReplicateRecord:
    """One replicate: noise, ADC, target, truncation sets and every requested method."""
    data = None
    if config.data_path is not None:
        data = load_real_csv(config.data_path, config.feature_columns, config.response_column,
                             config.max_candidates, config.master_seed)
    return _replicate(config, replicate_id, data, keep=keep)


def bootstrap_replicate(data: RealData, config: ExperimentConfig, replicate_id: int) -> ReplicateRecord:
    """Replicate on a real dataset; the true effect is unknown so coverage is left empty."""
    if data.responses.shape[0] < config.n_init + config.n_steps:
        raise ValueError("dataset has fewer rows than the sampling budget")
    return _replicate(config, replicate_id, data, data.candidates, None)


def _chunk(args) -> list[ReplicateRecord]:
    config, ids = args
    data = None
    if config.data_path is not None:
        data = load_real_csv(config.data_path, config.feature_columns, config.response_column,
                             config.max_candidates, config.master_seed)
    candidates, mu = _candidates(config, data)
    return [_replicate(config, i, data, candidates, mu) for i in ids]


def run_config(config: ExperimentConfig, workers: int | None = None) -> list[ReplicateRecord]:
    """All replicates of one configuration, ordered by replicate id."""
    workers = config.workers if workers is None else workers
    ids = list(range(config.replicates))
    if workers <= 1:
        return _chunk((config, ids))
    n_chunks = min(len(ids), workers * 4)
    chunks = [(config, ids[k::n_chunks]) for k in range(n_chunks)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_chunk, chunks))
    records = [r for part in parts for r in part]
    records.sort(key=lambda r: r.replicate_id)
    return records


def run_sweep(configs: Sequence[ExperimentConfig], workers: int | None = None) -> list[list[ReplicateRecord]]:
    if not configs:
        raise ValueError("empty sweep")
    return [run_config(c, workers) for c in configs]


# --------------------------------------------------------------------------- aggregation


def binomial_se(rate: float, n: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / n) if n > 0 else math.nan


@dataclass
class AggregateRow:
    method: str
    n_effective: int
    n_skipped: int
    reject_rate: float
    reject_se: float
    coverage_rate: float
    coverage_se: float
    ci_length_median: float
    ci_length_q90: float


def aggregate(records: Iterable[ReplicateRecord], methods: Sequence[str]) -> list[AggregateRow]:
    """Rates, binomial standard errors and CI-length summaries per method.

    Independent of the order in which replicates are supplied.
    """
    records = sorted(records, key=lambda r: r.replicate_id)
    out = []
    for m in methods:
        rows = [r.row(m) for r in records]
        live = [r for r in rows if not r.skipped]
        n = len(live)
        rej = float(np.mean([r.reject for r in live])) if n else math.nan
        cov_rows = [r.cover for r in live if r.cover is not None]
        cov = float(np.mean(cov_rows)) if cov_rows else math.nan
        lengths = np.array([r.ci_length for r in live], dtype=float)
        med = float(np.quantile(lengths, 0.5, method="inverted_cdf")) if n else math.nan
        q90 = float(np.quantile(lengths, 0.9, method="inverted_cdf")) if n else math.nan
        out.append(AggregateRow(m, n, len(rows) - n, rej, binomial_se(rej, n), cov, binomial_se(cov, len(cov_rows)),
                                med, q90))
    return out


def uniformity_check(pvalues, significance: float = 0.01) -> tuple[float, bool]:
    """One-sample Kolmogorov-Smirnov statistic against U(0, 1) and whether it
    stays below the asymptotic critical value."""
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        raise ValueError("need at least one p-value")
    stat = float(stats.kstest(p, "uniform").statistic)
    crit = float(stats.kstwobign.ppf(1.0 - significance)) / math.sqrt(p.size)
    return stat, stat < crit


# --------------------------------------------------------------------------- output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def config_header(config_items: Iterable[tuple[str, object]]) -> str:
    return "".join(f"# {k} = {_fmt_value(v)}\n" for k, v in config_items)


def _fmt_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt_value(x) for x in v)
    return "" if v is None else _fmt(v)


def replicate_table(config_id: int, records: Sequence[ReplicateRecord]) -> list[list[str]]:
    rows = []
    for rec in records:
        for r in rec.rows:
            rows.append([
                str(config_id), str(rec.replicate_id), r.method, _fmt(r.p_value), _fmt(r.ci_lo), _fmt(r.ci_hi),
                _fmt(r.ci_length), _fmt(r.reject), _fmt(r.cover), _fmt(r.delta_true), _fmt(r.z_lo), _fmt(r.z_hi),
                _fmt(r.skipped), r.skip_reason, "" if r.wall_ms is None else f"{r.wall_ms:.3f}",
            ])
    return rows


def write_csv(fh, header_comment: str, columns: Sequence[str], rows: Iterable[Sequence[str]]):
    fh.write(header_comment)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)


def render_replicates(configs: Sequence[ExperimentConfig], results: Sequence[Sequence[ReplicateRecord]],
                      header_comment: str = "") -> str:
    buf = io.StringIO()
    rows = [row for k, recs in enumerate(results) for row in replicate_table(k, recs)]
    write_csv(buf, header_comment, REPLICATE_COLUMNS, rows)
    return buf.getvalue()


def render_aggregate(configs: Sequence[ExperimentConfig], results: Sequence[Sequence[ReplicateRecord]],
                     varying_keys: Sequence[str], header_comment: str = "") -> str:
    buf = io.StringIO()
    rows = []
    for k, (cfg, recs) in enumerate(zip(configs, results)):
        keyvals = [_fmt_value(getattr(cfg, key)) for key in varying_keys]
        for agg in aggregate(recs, cfg.methods):
            rows.append([str(k)] + keyvals + [_fmt(getattr(agg, c)) for c in AGGREGATE_COLUMNS])
    write_csv(buf, header_comment, ["config_id", *varying_keys, *AGGREGATE_COLUMNS], rows)
    return buf.getvalue()


CONFIG_FIELDS = tuple(f.name for f in fields(ExperimentConfig))


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **kw)
