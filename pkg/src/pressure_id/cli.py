"""Command-line surface: generate, split, train, ablate, report.

Experiments are file-driven: a JSON config names the datasets, the mPnS
budget, and the training hyperparameters; command-line flags override
individual fields. Outputs land under ``<out_root>/<name>/<seed>/`` and are
reproducible byte-for-byte given the same config and seeds (no timestamps
in data files). The default output root comes from the PRESSURE_ID_RUNS
environment variable, falling back to ``runs``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .augment import AugmentConfig
from .baselines import BaselineSpec
from .data import (
    DatasetManifest,
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .evaluation import (
    ablate_encoder_decoder,
    ablate_postures,
    ablate_samples,
    aggregate,
    markdown_table,
    plot_confusion,
    plot_sweep,
    reports_to_csv,
    run_experiment,
)
from .losses import LossWeights
from .models import EncoderConfig, save_checkpoint
from .splits import MPnSSpec, split_mpns
from .training import TrainConfig

ENV_OUT_ROOT = "PRESSURE_ID_RUNS"

PRESETS = {
    "chr-syn": dict(posture_count=12),
    "bed-syn": dict(posture_count=6),
}


def _default_out_root() -> str:
    return os.environ.get(ENV_OUT_ROOT, "runs")


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _train_config_from_dict(d: dict, seed: int) -> TrainConfig:
    augment_raw = d.get("augment", "unset")
    if augment_raw is None:
        augment = None
    elif augment_raw == "unset":
        augment = AugmentConfig()
    else:
        augment = AugmentConfig(**augment_raw)
    return TrainConfig(
        temperature=d.get("temperature", 0.10),
        weights=LossWeights(**d.get("weights", {})),
        learning_rate=d.get("learning_rate", 5e-4),
        epochs=d.get("epochs", 150),
        batch_size=d.get("batch_size", 32),
        encoder=EncoderConfig(**d.get("encoder", {})),
        decoder_sharing=d.get("decoder_sharing", "independent"),
        augment=augment,
        stop_gradient_auxiliary=d.get("stop_gradient_auxiliary", False),
        seed=seed,
    )


def _apply_train_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    train = dict(cfg.get("train", {}))
    if args.epochs is not None:
        train["epochs"] = args.epochs
    if args.batch_size is not None:
        train["batch_size"] = args.batch_size
    if args.learning_rate is not None:
        train["learning_rate"] = args.learning_rate
    if args.encoder is not None:
        train.setdefault("encoder", {})
        train["encoder"] = {**train["encoder"], "variant": args.encoder}
    if args.embedding_dim is not None:
        train.setdefault("encoder", {})
        train["encoder"] = {**train["encoder"], "embedding_dim": args.embedding_dim}
    if args.decoder_sharing is not None:
        train["decoder_sharing"] = args.decoder_sharing
    if args.no_augment:
        train["augment"] = None
    cfg["train"] = train
    return cfg


def cmd_generate(args: argparse.Namespace) -> int:
    preset = PRESETS[args.preset]
    config = SyntheticConfig(
        subject_count=args.subjects,
        posture_count=args.postures if args.postures else preset["posture_count"],
        samples_per_subject_posture=args.samples,
        seed=args.seed,
        noise_scale=args.noise_scale,
        jitter_px=args.jitter_px,
        separability=args.separability,
    )
    records, manifest = generate_synthetic(config)
    manifest = DatasetManifest(
        name=args.preset,
        subject_count=manifest.subject_count,
        posture_count=manifest.posture_count,
        samples_per_subject_posture=manifest.samples_per_subject_posture,
        generator_seed=config.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.preset}.prsd"
    save_dataset(records, manifest, path)
    print(f"wrote {len(records)} records to {path}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    records, manifest = load_dataset(args.dataset)
    spec = MPnSSpec(
        m=args.m, n=args.n, split_seed=args.split_seed,
        val_fraction=args.val_fraction,
    )
    result = split_mpns(records, manifest, spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.save(out)
    print(
        f"wrote split {spec.tag} (train {len(result.train)}, val "
        f"{len(result.val)}, test {len(result.test)}) to {out}"
    )
    return 0


def _run_dir(out_root: str, name: str, seed: int) -> Path:
    d = Path(out_root) / name / str(seed)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    if args.target:
        cfg["target"] = args.target
    if args.auxiliary:
        cfg["auxiliary"] = args.auxiliary
    if args.method:
        cfg["method"] = args.method
    if args.seeds:
        cfg["seeds"] = _int_list(args.seeds)
    if args.name:
        cfg["name"] = args.name
    if args.m is not None:
        cfg.setdefault("mpns", {})["m"] = args.m
    if args.n is not None:
        cfg.setdefault("mpns", {})["n"] = args.n
    if args.val_fraction is not None:
        cfg.setdefault("mpns", {})["val_fraction"] = args.val_fraction
    cfg = _apply_train_overrides(cfg, args)

    method = cfg.get("method", "ours")
    seeds = cfg.get("seeds", [0])
    name = cfg.get("name", f"{method}")
    out_root = args.out_root or cfg.get("out_root") or _default_out_root()
    mpns = cfg.get("mpns", {})
    m, n = mpns.get("m", 2), mpns.get("n", 50)
    val_fraction = mpns.get("val_fraction", 0.2)
    baseline_spec = BaselineSpec(kind=method, **cfg.get("baseline", {})) \
        if method in ("knn", "nil", "aug", "recon", "trans") else None

    target_records, target_manifest = load_dataset(cfg["target"])
    auxiliary_records = None
    if cfg.get("auxiliary"):
        auxiliary_records, _ = load_dataset(cfg["auxiliary"])

    reports = []
    for seed in seeds:
        spec = MPnSSpec(m=m, n=n, split_seed=seed, val_fraction=val_fraction)
        train_config = _train_config_from_dict(cfg.get("train", {}), seed=seed)
        out = run_experiment(
            method, target_records, target_manifest, auxiliary_records,
            spec, train_config, baseline_spec,
        )
        run_dir = _run_dir(out_root, name, seed)
        out.report.save(run_dir / "report.json")
        out.split.save(run_dir / "split.json")
        plot_confusion(out.report, run_dir / "confusion.png")
        if out.result is not None:
            out.result.history.to_csv(run_dir / "history.csv")
            save_checkpoint(
                run_dir / "checkpoint.pt",
                out.result.target,
                out.result.auxiliary,
                train_config.decoder_sharing,
                extra={"train_seed": seed, "mpns": {"m": m, "n": n}},
            )
        elif out.baseline is not None and out.baseline.model is not None:
            if out.baseline.history is not None:
                out.baseline.history.to_csv(run_dir / "history.csv")
            save_checkpoint(
                run_dir / "checkpoint.pt",
                out.baseline.model,
                None,
                "independent",
                extra={"train_seed": seed, "mpns": {"m": m, "n": n}},
            )
        reports.append(out.report)
        print(f"[{name}/{seed}] {method} accuracy {out.report.accuracy:.4f}")

    agg = aggregate(reports)
    exp_dir = Path(out_root) / name
    (exp_dir / "aggregate.json").write_text(agg.to_json())
    (exp_dir / "summary.md").write_text(markdown_table({method: reports}))
    reports_to_csv(reports, exp_dir / "results.csv")
    print(
        f"[{name}] {method} over {len(seeds)} seeds: "
        f"{agg.mean:.4f} ± {agg.std:.4f}"
    )
    return 0


def _write_sweep_csv(rows, key_fields: list[str], path: Path) -> None:
    n_seeds = max(len(r.accuracies) for r in rows)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            key_fields + [f"acc_{i + 1}" for i in range(n_seeds)] + ["mean", "std"]
        )
        for row in rows:
            writer.writerow(
                [row.key[f] for f in key_fields]
                + [repr(a) for a in row.accuracies]
                + [repr(row.mean), repr(row.std)]
            )


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    cfg = _apply_train_overrides(cfg, args)
    if args.target:
        cfg["target"] = args.target
    if args.auxiliary:
        cfg["auxiliary"] = args.auxiliary
    out_root = args.out_root or cfg.get("out_root") or _default_out_root()
    name = args.name or cfg.get("name", f"ablate-{args.what}")
    seeds = _int_list(args.seeds) if args.seeds else cfg.get("seeds", [0])
    mpns = cfg.get("mpns", {})
    val_fraction = mpns.get("val_fraction", 0.2)
    train_config = _train_config_from_dict(cfg.get("train", {}), seed=0)

    target_records, target_manifest = load_dataset(cfg["target"])
    auxiliary_records, _ = load_dataset(cfg["auxiliary"])
    exp_dir = Path(out_root) / name
    exp_dir.mkdir(parents=True, exist_ok=True)

    if args.what == "postures":
        rows = ablate_postures(
            target_records, target_manifest, auxiliary_records,
            m_values=_int_list(args.m_values),
            n=args.n if args.n is not None else mpns.get("n", 50),
            seeds=seeds, config=train_config, val_fraction=val_fraction,
        )
        _write_sweep_csv(rows, ["m"], exp_dir / "postures.csv")
        plot_sweep(rows, "m", exp_dir / "postures.png", "accuracy vs training postures")
    elif args.what == "samples":
        rows = ablate_samples(
            target_records, target_manifest, auxiliary_records,
            m=args.m if args.m is not None else mpns.get("m", 2),
            n_values=_int_list(args.n_values),
            seeds=seeds, config=train_config, val_fraction=val_fraction,
        )
        _write_sweep_csv(rows, ["n"], exp_dir / "samples.csv")
        plot_sweep(rows, "n", exp_dir / "samples.png", "accuracy vs samples per posture")
    else:  # encdec
        spec = MPnSSpec(
            m=mpns.get("m", 2), n=mpns.get("n", 50), split_seed=0,
            val_fraction=val_fraction,
        )
        rows = ablate_encoder_decoder(
            target_records, target_manifest, auxiliary_records,
            spec, seeds, train_config,
        )
        _write_sweep_csv(rows, ["encoder", "decoder"], exp_dir / "encdec.csv")
    print(f"wrote ablation outputs to {exp_dir}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .evaluation import RunReport

    by_method: dict[str, list] = {}
    for root in args.runs:
        for path in sorted(Path(root).rglob("report.json")):
            report = RunReport.load(path)
            by_method.setdefault(report.method, []).append(report)
    if not by_method:
        raise FileNotFoundError(f"no report.json files under {args.runs}")
    table = markdown_table(by_method)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table)
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pressure-id",
        description="Contrastive dual-branch user identification on pressure maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset preset")
    g.add_argument("--preset", choices=sorted(PRESETS), required=True)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--out", default="data")
    g.add_argument("--subjects", type=int, default=8)
    g.add_argument("--postures", type=int, default=None)
    g.add_argument("--samples", type=int, default=100)
    g.add_argument("--noise-scale", type=float, default=0.02)
    g.add_argument("--jitter-px", type=int, default=2)
    g.add_argument("--separability", type=float, default=1.0)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("split", help="write an mPnS split index")
    s.add_argument("--dataset", required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--val-fraction", type=float, default=0.2)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_split)

    def add_common_train_flags(p):
        p.add_argument("--config", default=None, help="JSON experiment config")
        p.add_argument("--target", default=None)
        p.add_argument("--auxiliary", default=None)
        p.add_argument("--name", default=None)
        p.add_argument("--out-root", default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--learning-rate", type=float, default=None)
        p.add_argument("--encoder", choices=("tiny", "small", "medium", "large"), default=None)
        p.add_argument("--embedding-dim", type=int, default=None)
        p.add_argument("--decoder-sharing", choices=("independent", "shared"), default=None)
        p.add_argument("--no-augment", action="store_true")

    t = sub.add_parser("train", help="run one method over a list of seeds")
    add_common_train_flags(t)
    t.add_argument("--method", choices=("ours", "knn", "nil", "aug", "recon", "trans"), default=None)
    t.add_argument("--seeds", default=None, help="comma-separated list")
    t.add_argument("--m", type=int, default=None)
    t.add_argument("--n", type=int, default=None)
    t.add_argument("--val-fraction", type=float, default=None)
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("ablate", help="ablation sweeps")
    a.add_argument("what", choices=("postures", "samples", "encdec"))
    add_common_train_flags(a)
    a.add_argument("--seeds", default=None)
    a.add_argument("--m", type=int, default=None)
    a.add_argument("--n", type=int, default=None)
    a.add_argument("--m-values", default="1,2,4,6,8")
    a.add_argument("--n-values", default="10,25,50,100")
    a.set_defaults(func=cmd_ablate)

    r = sub.add_parser("report", help="assemble a markdown summary table")
    r.add_argument("--runs", nargs="+", required=True)
    r.add_argument("--out", default="summary.md")
    r.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface component errors with a nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
