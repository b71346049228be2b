"""Full 2P50S benchmark: every method over five re-drawn splits.

Generates the two synthetic presets if missing, runs KNN, Nil, Aug, Recon,
Trans, and the dual-branch method over seeds 1..5, and assembles one
markdown table across methods. Defaults use the tiny encoder and a reduced
epoch budget so the whole sweep finishes on a desktop CPU; pass
--encoder small --epochs 150 for the paper-scale configuration.

Usage: python scripts/run_2p50s_benchmark.py [--epochs 25] [--encoder tiny]
       [--out-root runs] [--data-dir data] [--seeds 1,2,3,4,5]
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
    parser.add_argument("--embedding-dim", type=int, default=64)
    parser.add_argument("--seeds", default="1,2,3,4,5")
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--out-root", default="runs")
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
        "--m", "2", "--n", "50",
        "--epochs", str(args.epochs),
        "--encoder", args.encoder,
        "--embedding-dim", str(args.embedding_dim),
        "--out-root", args.out_root,
    ]
    run_dirs = []
    for method in ("knn", "nil", "aug", "recon", "trans", "ours"):
        name = f"2p50s-{method}"
        rc = cli(["train", "--method", method, "--name", name] + common)
        if rc != 0:
            return rc
        run_dirs.append(str(Path(args.out_root) / name))

    return cli([
        "report", "--runs", *run_dirs,
        "--out", str(Path(args.out_root) / "2p50s-summary.md"),
    ])


if __name__ == "__main__":
    sys.exit(main())
