"""Power curve over amplitude for one objective family.

    python scripts/power_sweep.py [--family sinc] [--m 64] [--replicates 500]

``--m 1024`` runs the fine one-dimensional grid; expect about 15x the runtime.
"""

import argparse
from pathlib import Path

from postadc.harness import ExperimentConfig, aggregate, render_aggregate, render_replicates, run_sweep
from postadc.objectives import FAMILIES

METHODS = ("post_adc", "naive", "bonferroni")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--family", default="sinc", choices=[f for f in FAMILIES if f != "constant_zero"])
    ap.add_argument("--amplitudes", default="0,1,2,4,8")
    ap.add_argument("--m", type=int, default=64, help="grid points per axis")
    ap.add_argument("--replicates", type=int, default=500)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()

    amps = [float(a) for a in args.amplitudes.split(",")]
    configs = [ExperimentConfig(algorithm=alg, family=args.family, a=a, m_per_axis=args.m,
                                replicates=args.replicates, methods=METHODS)
               for alg in ("gpucb", "tpe") for a in amps]
    results = run_sweep(configs, args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = f"power_{args.family}_m{args.m}"
    (args.out / f"{stem}_replicates.csv").write_text(render_replicates(configs, results))
    (args.out / f"{stem}_aggregate.csv").write_text(render_aggregate(configs, results, ["algorithm", "a"]))

    print(f"{'algorithm':<8} {'a':>4}  " + "  ".join(f"{m:>16}" for m in METHODS))
    for cfg, recs in zip(configs, results):
        rows = {r.method: r for r in aggregate(recs, METHODS)}
        cells = "  ".join(f"{rows[m].reject_rate:7.3f} ± {rows[m].reject_se:.3f}" for m in METHODS)
        print(f"{cfg.algorithm:<8} {cfg.a:>4g}  {cells}")


if __name__ == "__main__":
    main()
