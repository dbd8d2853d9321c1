"""Replay every solved truncation set against a brute-force scan.

    python scripts/scan_verify.py [--instances 100] [--points 2001] [--corrupt]

Equivalent to ``postadc scan-verify -c scripts/configs/scan.cfg``.
"""

import argparse
import sys
from pathlib import Path

from postadc.cli import main as cli_main

CONFIG = Path(__file__).with_name("configs") / "scan.cfg"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=100)
    ap.add_argument("--points", type=int, default=2001)
    ap.add_argument("--mask", default="full", choices=["full", "trajectory", "target"])
    ap.add_argument("--corrupt", action="store_true", help="negative control; expected to fail")
    args = ap.parse_args()
    argv = ["scan-verify", "-c", str(CONFIG), f"instances={args.instances}", f"scan_points={args.points}",
            f"mask={args.mask}"]
    if args.corrupt:
        argv.append("--corrupt")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
