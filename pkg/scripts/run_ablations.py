"""Ablation sweeps: posture budget, sample budget, encoder/decoder grid.

Usage: python scripts/run_ablations.py [--epochs 25] [--seeds 1,2,3]
       [--skip-encdec]  # the encoder grid trains the heavyweight tiers

Writes curve CSVs and plots under <out-root>/ablate-*.
"""

import argparse
import sys
from pathlib import Path

from pressure_id.cli import main as cli


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--epochs", type=int, default=25)
    parser.add_argument("--encoder", default="tiny",
                        choices=("tiny", "small", "medium", "large"))
    parser.add_argument("--seeds", default="1,2,3")
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--out-root", default="runs")
    parser.add_argument("--skip-encdec", action="store_true")
    args = parser.parse_args()

    data = Path(args.data_dir)
    for preset in ("chr-syn", "bed-syn"):
        if not (data / f"{preset}.prsd").exists():
            rc = cli(["generate", "--preset", preset, "--seed", "42",
                      "--out", str(data)])
            if rc != 0:
                return rc

    common = [
        "--target", str(data / "chr-syn.prsd"),
        "--auxiliary", str(data / "bed-syn.prsd"),
        "--seeds", args.seeds,
        "--epochs", str(args.epochs),
        "--encoder", args.encoder,
        "--out-root", args.out_root,
    ]
    rc = cli(["ablate", "postures", "--m-values", "1,2,4,6,8", "--n", "50",
              "--name", "ablate-postures"] + common)
    if rc != 0:
        return rc
    rc = cli(["ablate", "samples", "--m", "2", "--n-values", "10,25,50,100",
              "--name", "ablate-samples"] + common)
    if rc != 0:
        return rc
    if not args.skip_encdec:
        rc = cli(["ablate", "encdec", "--name", "ablate-encdec"] + common)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
