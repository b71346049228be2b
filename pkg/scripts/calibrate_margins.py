"""Pilot the 2P50S benchmark orderings at a given epoch budget.

Usage: python scripts/calibrate_margins.py [epochs] [seed1,seed2,...]

Prints per-seed accuracies for ours / nil / aug on the chr-syn target with
the bed-syn auxiliary, plus the m=6 sweep point, so an epoch budget can be
chosen before pinning the acceptance harness.
"""

import sys
import time

import torch

from pressure_id.data import SyntheticConfig, generate_synthetic
from pressure_id.evaluation import run_experiment
from pressure_id.models import EncoderConfig
from pressure_id.splits import MPnSSpec
from pressure_id.training import TrainConfig

torch.set_num_threads(1)


def main() -> None:
    epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 25
    seeds = (
        [int(s) for s in sys.argv[2].split(",")]
        if len(sys.argv) > 2
        else [1, 2]
    )
    chr_records, chr_manifest = generate_synthetic(
        SyntheticConfig(posture_count=12, seed=42)
    )
    bed_records, _ = generate_synthetic(SyntheticConfig(posture_count=6, seed=42))
    config = TrainConfig(
        encoder=EncoderConfig(variant="tiny", embedding_dim=64), epochs=epochs
    )

    accs: dict[tuple[str, int, int], float] = {}
    for seed in seeds:
        for method in ("ours", "nil", "aug"):
            t0 = time.time()
            out = run_experiment(
                method, chr_records, chr_manifest, bed_records,
                MPnSSpec(m=2, n=50, split_seed=seed),
                config.with_overrides(seed=seed),
            )
            accs[(method, 2, seed)] = out.report.accuracy
            print(
                f"seed {seed} m=2 {method:5s} acc={out.report.accuracy:.4f} "
                f"({time.time() - t0:.0f}s)",
                flush=True,
            )
        t0 = time.time()
        out = run_experiment(
            "ours", chr_records, chr_manifest, bed_records,
            MPnSSpec(m=6, n=50, split_seed=seed),
            config.with_overrides(seed=seed),
        )
        accs[("ours", 6, seed)] = out.report.accuracy
        print(
            f"seed {seed} m=6 ours  acc={out.report.accuracy:.4f} "
            f"({time.time() - t0:.0f}s)",
            flush=True,
        )

    for method in ("ours", "nil", "aug"):
        vals = [accs[(method, 2, s)] for s in seeds]
        print(f"m=2 {method:5s} mean={sum(vals) / len(vals):.4f} {vals}")
    vals6 = [accs[("ours", 6, s)] for s in seeds]
    print(f"m=6 ours  mean={sum(vals6) / len(vals6):.4f} {vals6}")


if __name__ == "__main__":
    main()
