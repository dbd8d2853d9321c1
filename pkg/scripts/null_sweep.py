"""Null sweep: type-I error, coverage, p-value uniformity and ablation containment.

    python scripts/null_sweep.py [--replicates N] [--workers W] [--out DIR]
"""

import argparse
import math
from pathlib import Path

from postadc.harness import ExperimentConfig, aggregate, render_aggregate, render_replicates, run_sweep, uniformity_check

METHODS = ("post_adc", "naive", "bonferroni", "wo_eta", "wo_T")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--replicates", type=int, default=1000)
    ap.add_argument("--m", type=int, default=64, help="grid points per axis")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()

    configs = [ExperimentConfig(algorithm=a, m_per_axis=args.m, replicates=args.replicates, methods=METHODS)
               for a in ("gpucb", "tpe")]
    results = run_sweep(configs, args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "null_replicates.csv").write_text(render_replicates(configs, results))
    (args.out / "null_aggregate.csv").write_text(render_aggregate(configs, results, ["algorithm"]))

    pooled = []
    for cfg, recs in zip(configs, results):
        print(f"== {cfg.algorithm}")
        for row in aggregate(recs, METHODS):
            print(f"  {row.method:<10} reject {row.reject_rate:.3f} ± {row.reject_se:.3f}   "
                  f"cover {row.coverage_rate:.3f}   median CI {row.ci_length_median:.2f}   skipped {row.n_skipped}")
        bad = 0
        for rec in recs:
            full = rec.row("post_adc")
            if full.skipped:
                continue
            pooled.append(full.p_value)
            for name in ("wo_eta", "wo_T"):
                ab = rec.row(name)
                if ab.skipped or not (ab.z_lo <= full.z_lo and full.z_hi <= ab.z_hi):
                    bad += 1
        print(f"  containment violations: {bad}")
    stat, ok = uniformity_check(pooled)
    print(f"KS uniformity of pooled post_adc p-values: D = {stat:.4f} "
          f"(critical {1.6276 / math.sqrt(len(pooled)):.4f}) {'pass' if ok else 'fail'}")


if __name__ == "__main__":
    main()
