"""Command-line entry point: ``postadc {infer,sweep,toy-check,scan-verify,dump-constraints}``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from pathlib import Path

from . import config as cfgmod
from .adc import FactorizationError, initial_design, make_algorithm
from .candidates import make_grid
from .distributions import NumericalFailure
from .geometry import (
    InconsistentEventError,
    compute_line,
    corrupt_binding_constraint,
    dump_constraints,
    event_constraints,
    scan_mismatches,
    solve_constraints,
)
from .harness import (
    config_header,
    render_aggregate,
    render_replicates,
    replicate_streams,
    run_replicate,
    run_sweep,
)
from .objectives import ObjectiveSpec, synth_objective
from .pipeline import observe
from .targets import DegenerateSelectionError
from .toy import run_toy_check

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4
EXIT_DEGENERATE = 5

SCAN_MAX_CANDIDATES = 64
SCAN_MAX_BUDGET = 20

log = logging.getLogger("postadc")


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_raw(args) -> dict[str, str]:
    raw = cfgmod.load(args.config) if args.config else {}
    return cfgmod.apply_overrides(raw, args.overrides)


def _single(raw):
    configs, axes = cfgmod.expand(raw)
    if len(configs) != 1:
        raise cfgmod.ConfigError(f"this command takes a single configuration; got sweep axes {axes}")
    return configs[0]


def _write(args, text: str):
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _header(raw) -> str:
    return config_header(cfgmod.effective_items(raw))


# --------------------------------------------------------------------------- commands


def cmd_infer(args) -> int:
    raw = _load_raw(args)
    config = _single(raw)
    rid = cfgmod.command_value(raw, "replicate_id", 0)
    keep: dict = {}
    record = run_replicate(config, rid, keep)
    if "error" in keep:
        exc = keep["error"]
        code = EXIT_DEGENERATE if isinstance(exc, DegenerateSelectionError) else EXIT_NUMERICAL
        raise _Fail(code, f"{type(exc).__name__}: {exc}")
    diag = []
    analysis = keep.get("analysis")
    if analysis is not None:
        event, line = analysis.event, analysis.line
        diag.append(f"# diag t_obs = {line.t_obs!r}")
        diag.append(f"# diag v_eta = {line.v_eta!r}")
        diag.append(f"# diag selected_sets = {event.selection.sets}")
        blocks = event_constraints(event, line, "full")
        for blk in blocks:
            diag.append(f"# diag constraints_{blk.family} = {len(blk)}")
        for method, Z in analysis.sets.items():
            diag.append(f"# diag Z_{method} = {Z}")
        if args.dump_constraints:
            _dump(args.dump_constraints, blocks)
    text = _header(raw) + "".join(d + "\n" for d in diag) + render_replicates([config], [[record]])
    _write(args, text)
    failed = [r for r in record.rows if r.skipped]
    if failed:
        raise _Fail(EXIT_NUMERICAL, "; ".join(f"{r.method}: {r.skip_reason}" for r in failed))
    return EXIT_OK


def cmd_sweep(args) -> int:
    raw = _load_raw(args)
    configs, axes = cfgmod.expand(raw)
    if not args.output:
        raise cfgmod.ConfigError("sweep needs --output for the replicate-level file")
    t0 = time.perf_counter()
    results = run_sweep(configs, args.workers)
    log.info("sweep of %d configs finished in %.1fs", len(configs), time.perf_counter() - t0)
    header = _header(raw)
    Path(args.output).write_text(render_replicates(configs, results, header))
    agg_path = args.aggregate or str(Path(args.output).with_suffix("")) + "_aggregate.csv"
    Path(agg_path).write_text(render_aggregate(configs, results, axes, header))
    return EXIT_OK


def cmd_toy_check(args) -> int:
    t0 = time.perf_counter()
    report = run_toy_check(args.draws, args.seed)
    lines = [f"toy-check draws={report.draws} time={time.perf_counter() - t0:.3f}s"]
    lines += [f"  {label}: {n} draws" for label, n in sorted(report.branch_counts.items())]
    lines += [f"  FAIL {f}" for f in report.failures[:20]]
    lines.append("PASS" if report.passed else f"FAIL ({len(report.failures)} mismatches)")
    _write(args, "\n".join(lines) + "\n")
    return EXIT_OK if report.passed else EXIT_VERIFY


def scan_verify(config, instances: int, scan_points: int = 2001, mask: str = "full", corrupt: bool = False):
    """Scan-oracle comparison on ``instances`` random small problems.

    Returns a list of ``(instance, n_mismatches, detail)`` and the number of
    instances skipped as degenerate.
    """
    cands = make_grid(config.d, config.m_per_axis)
    if cands.size > SCAN_MAX_CANDIDATES or config.n_init + config.n_steps > SCAN_MAX_BUDGET:
        raise cfgmod.ConfigError(
            f"scan-verify is limited to M <= {SCAN_MAX_CANDIDATES} and N <= {SCAN_MAX_BUDGET}")
    mu = synth_objective(ObjectiveSpec(config.family, config.a, config.d), cands)
    params = config.rule_params()
    out, skipped = [], 0
    for k in range(instances):
        init_seed, noise_rng, _, _ = replicate_streams(config.master_seed, k)
        N = config.n_init + config.n_steps
        eps = noise_rng.normal(0.0, math.sqrt(config.sigma2), N)
        model = make_algorithm(config.algorithm, cands, config.adc_config())
        initial = initial_design(cands.size, config.n_init, init_seed)
        try:
            event = observe(model, initial, config.n_steps, lambda t, c: mu[c] + eps[t], config.rule, params)
            line = compute_line(event.selection.eta, config.sigma2, event.y)
            blocks = event_constraints(event, line, mask)
            if corrupt:
                blocks = corrupt_binding_constraint(blocks, line, 0.5 * math.sqrt(line.v_eta))
            Z = solve_constraints(blocks, line.t_obs)
        except (DegenerateSelectionError, NumericalFailure, FactorizationError) as exc:
            log.info("instance %d skipped: %s", k, exc)
            skipped += 1
            continue
        except InconsistentEventError as exc:
            out.append((k, 1, f"inconsistent event: {exc}"))
            continue
        bad = scan_mismatches(event, line, Z, scan_points, mask=mask)
        out.append((k, len(bad), f"Z={Z} first={bad[:3]}" if bad else ""))
    return out, skipped


def cmd_scan_verify(args) -> int:
    raw = _load_raw(args)
    configs, _ = cfgmod.expand(raw)
    instances = cfgmod.command_value(raw, "instances", 100)
    points = cfgmod.command_value(raw, "scan_points", 2001)
    mask = cfgmod.command_value(raw, "mask", "full", str)
    lines, total = [], 0
    for config in configs:
        t0 = time.perf_counter()
        results, skipped = scan_verify(config, instances, points, mask, args.corrupt)
        mism = sum(n for _, n, _ in results)
        total += mism
        lines.append(f"{config.algorithm} rule={config.rule} M={config.m_per_axis ** config.d} "
                     f"N={config.n_init + config.n_steps} instances={len(results)} skipped={skipped} "
                     f"mismatches={mism} time={time.perf_counter() - t0:.1f}s")
        lines += [f"  instance {k}: {n} mismatches {detail}" for k, n, detail in results if n]
    lines.append("PASS" if total == 0 else f"FAIL ({total} mismatching grid points)")
    _write(args, _header(raw) + "\n".join(lines) + "\n")
    return EXIT_OK if total == 0 else EXIT_VERIFY


def _dump(path_or_stream, blocks):
    rows = dump_constraints(blocks)
    fh = open(path_or_stream, "w", newline="") if isinstance(path_or_stream, str) else path_or_stream
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["family", "tag", "c", "d", "sense"])
        w.writerows(rows)
    finally:
        if fh is not path_or_stream:
            fh.close()


def cmd_dump_constraints(args) -> int:
    raw = _load_raw(args)
    config = _single(raw)
    rid = cfgmod.command_value(raw, "replicate_id", 0)
    mask = cfgmod.command_value(raw, "mask", "full", str)
    cands = make_grid(config.d, config.m_per_axis)
    mu = synth_objective(ObjectiveSpec(config.family, config.a, config.d), cands)
    init_seed, noise_rng, _, _ = replicate_streams(config.master_seed, rid)
    eps = noise_rng.normal(0.0, math.sqrt(config.sigma2), config.n_init + config.n_steps)
    model = make_algorithm(config.algorithm, cands, config.adc_config())
    event = observe(model, initial_design(cands.size, config.n_init, init_seed), config.n_steps,
                    lambda t, c: mu[c] + eps[t], config.rule, config.rule_params())
    line = compute_line(event.selection.eta, config.sigma2, event.y)
    blocks = event_constraints(event, line, mask)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(_header(raw))
            _dump(fh, blocks)
    else:
        sys.stdout.write(_header(raw))
        _dump(sys.stdout, blocks)
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="postadc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", "-c", required=False, help="key = value configuration file")
        sp.add_argument("--output", "-o", help="output path (default: stdout)")
        sp.add_argument("-v", "--verbose", action="count", default=0)
        sp.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides")

    sp = sub.add_parser("infer", help="one end-to-end inference run")
    common(sp)
    sp.add_argument("--dump-constraints", metavar="PATH", help="also write the tagged constraint list")
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("sweep", help="Monte Carlo sweep over a configuration grid")
    common(sp)
    sp.add_argument("--aggregate", metavar="PATH", help="aggregate table path (default: <output>_aggregate.csv)")
    sp.add_argument("--workers", type=int, default=None, help="worker processes (overrides the config)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("toy-check", help="golden check of the three-candidate toy example")
    sp.add_argument("--output", "-o")
    sp.add_argument("--draws", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-v", "--verbose", action="count", default=0)
    sp.set_defaults(func=cmd_toy_check, config=None, overrides=[])

    sp = sub.add_parser("scan-verify", help="compare truncation sets against brute-force replay")
    common(sp)
    sp.add_argument("--corrupt", action="store_true", help="negative control: corrupt one binding constraint")
    sp.set_defaults(func=cmd_scan_verify)

    sp = sub.add_parser("dump-constraints", help="write the tagged constraints of one observed event")
    common(sp)
    sp.set_defaults(func=cmd_dump_constraints)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DegenerateSelectionError as exc:
        print(f"degenerate selection: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (NumericalFailure, InconsistentEventError, FactorizationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

