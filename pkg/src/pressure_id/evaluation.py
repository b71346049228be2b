"""Run reports, multi-seed aggregation, ablation sweeps, and plots.

A RunReport records overall accuracy, the 8x8 confusion matrix, per-subject
accuracy, and a per-posture accuracy breakdown (the latter is what shows
whether postures absent from training are still identified). Aggregation is
the sample mean and standard deviation of accuracy over repeated runs with
re-drawn splits.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as bl
from .data import DatasetManifest, SampleRecord, frames_array, posture_labels, subject_labels
from .models import NUM_SUBJECTS
from .splits import MPnSSpec, SplitResult, split_mpns, take
from .training import TrainConfig, TrainResult, predict, train

METHODS = ("ours", "knn", "nil", "aug", "recon", "trans")


@dataclass
class RunReport:
    method: str
    m: int
    n: int
    split_seed: int
    seed: int
    accuracy: float
    per_subject_accuracy: list[float]
    confusion: list[list[int]]
    per_posture_accuracy: dict[int, float]
    test_count: int

    def to_json(self) -> str:
        payload = asdict(self)
        payload["per_posture_accuracy"] = {
            str(k): v for k, v in self.per_posture_accuracy.items()
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        payload = json.loads(text)
        payload["per_posture_accuracy"] = {
            int(k): v for k, v in payload["per_posture_accuracy"].items()
        }
        return cls(**payload)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "RunReport":
        return cls.from_json(Path(path).read_text())


@dataclass
class AggregateReport:
    method: str
    m: int
    n: int
    accuracies: list[float]
    mean: float
    std: float
    run_count: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def report_from_predictions(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    postures: np.ndarray,
    *,
    method: str,
    m: int,
    n: int,
    split_seed: int,
    seed: int,
) -> RunReport:
    """Assemble a RunReport from prediction vectors."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    postures = np.asarray(postures, dtype=np.int64)
    if len(y_true) == 0:
        raise ValueError("cannot report on an empty test split")
    if not (len(y_true) == len(y_pred) == len(postures)):
        raise ValueError("prediction, label, and posture vectors must align")

    confusion = np.zeros((NUM_SUBJECTS, NUM_SUBJECTS), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    accuracy = float(np.trace(confusion) / len(y_true))

    per_subject = []
    for s in range(NUM_SUBJECTS):
        count = confusion[s].sum()
        per_subject.append(float(confusion[s, s] / count) if count else float("nan"))

    per_posture: dict[int, float] = {}
    for p in sorted(set(int(v) for v in postures)):
        sel = postures == p
        per_posture[p] = float(np.mean(y_true[sel] == y_pred[sel]))

    return RunReport(
        method=method,
        m=m,
        n=n,
        split_seed=split_seed,
        seed=seed,
        accuracy=accuracy,
        per_subject_accuracy=per_subject,
        confusion=confusion.tolist(),
        per_posture_accuracy=per_posture,
        test_count=len(y_true),
    )


def evaluate(
    model,
    test_records: list[SampleRecord],
    *,
    method: str,
    m: int,
    n: int,
    split_seed: int,
    seed: int,
) -> RunReport:
    """Score a trained branch on a test split."""
    if not test_records:
        raise ValueError("cannot evaluate on an empty test split")
    preds = predict(model, frames_array(test_records))
    return report_from_predictions(
        subject_labels(test_records),
        preds,
        posture_labels(test_records),
        method=method,
        m=m,
        n=n,
        split_seed=split_seed,
        seed=seed,
    )


def aggregate(reports: list[RunReport]) -> AggregateReport:
    """Sample mean and standard deviation of accuracy over runs."""
    if not reports:
        raise ValueError("aggregate needs at least one report")
    first = reports[0]
    for r in reports[1:]:
        if r.method != first.method or (r.m, r.n) != (first.m, first.n):
            raise ValueError(
                "aggregate mixes methods or specs: "
                f"{(r.method, r.m, r.n)} vs {(first.method, first.m, first.n)}"
            )
    accs = [r.accuracy for r in reports]
    mean = float(np.mean(accs))
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    return AggregateReport(
        method=first.method,
        m=first.m,
        n=first.n,
        accuracies=accs,
        mean=mean,
        std=std,
        run_count=len(accs),
    )


# ---------------------------------------------------------------------------
# Single-experiment pipeline and ablation sweeps
# ---------------------------------------------------------------------------

@dataclass
class ExperimentOutput:
    report: RunReport
    split: "SplitResult | None" = None
    result: TrainResult | None = None
    baseline: bl.BaselineResult | None = None


def run_experiment(
    method: str,
    target_records: list[SampleRecord],
    target_manifest: DatasetManifest,
    auxiliary_records: list[SampleRecord] | None,
    spec: MPnSSpec,
    config: TrainConfig,
    baseline_spec: bl.BaselineSpec | None = None,
) -> ExperimentOutput:
    """Split the target dataset per the mPnS spec and run one method on it."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    split = split_mpns(target_records, target_manifest, spec)
    train_recs = take(target_records, split.train)
    val_recs = take(target_records, split.val)
    test_recs = take(target_records, split.test)
    meta = dict(m=spec.m, n=spec.n, split_seed=spec.split_seed, seed=config.seed)

    if method == "knn":
        k = baseline_spec.k if baseline_spec else 5
        train_x = frames_array(train_recs)
        preds = bl.knn_predict(
            train_x, subject_labels(train_recs), frames_array(test_recs), k
        )
        report = report_from_predictions(
            subject_labels(test_recs), preds, posture_labels(test_recs),
            method="knn", **meta,
        )
        return ExperimentOutput(report, split=split)

    if method == "ours":
        if not auxiliary_records:
            raise ValueError("method 'ours' needs an auxiliary dataset")
        result = train(train_recs, val_recs, auxiliary_records, config)
        report = evaluate(result.target, test_recs, method="ours", **meta)
        return ExperimentOutput(report, split=split, result=result)

    if method == "nil":
        out = bl.run_nil(train_recs, val_recs, test_recs, config)
    elif method == "aug":
        out = bl.run_aug(train_recs, val_recs, test_recs, config)
    elif method == "recon":
        pe = baseline_spec.pretrain_epochs if baseline_spec else 50
        out = bl.run_recon(train_recs, val_recs, test_recs, config, pretrain_epochs=pe)
    else:  # trans
        if not auxiliary_records:
            raise ValueError("method 'trans' needs an auxiliary dataset")
        pe = baseline_spec.pretrain_epochs if baseline_spec else 50
        fe = baseline_spec.finetune_epochs if baseline_spec else None
        out = bl.run_trans(
            train_recs, val_recs, test_recs, auxiliary_records, config,
            pretrain_epochs=pe, finetune_epochs=fe,
        )
    report = evaluate(out.model, test_recs, method=method, **meta)
    return ExperimentOutput(report, split=split, baseline=out)


@dataclass
class SweepRow:
    key: dict
    accuracies: list[float]
    mean: float = field(init=False)
    std: float = field(init=False)

    def __post_init__(self) -> None:
        self.mean = float(np.mean(self.accuracies))
        self.std = (
            float(np.std(self.accuracies, ddof=1))
            if len(self.accuracies) > 1
            else 0.0
        )


def _sweep(
    cells: list[dict],
    seeds: list[int],
    runner,
) -> list[SweepRow]:
    rows = []
    for cell in cells:
        accs = [runner(cell, seed).accuracy for seed in seeds]
        rows.append(SweepRow(key=cell, accuracies=accs))
    return rows


def ablate_postures(
    target_records: list[SampleRecord],
    target_manifest: DatasetManifest,
    auxiliary_records: list[SampleRecord],
    m_values: list[int],
    n: int,
    seeds: list[int],
    config: TrainConfig,
    val_fraction: float = 0.2,
) -> list[SweepRow]:
    """Mean accuracy of the full method as a function of the posture budget m."""
    if not m_values:
        raise ValueError("m_values must be non-empty")
    for m in m_values:
        if not (1 <= m <= target_manifest.posture_count):
            raise ValueError(
                f"m={m} out of range [1, {target_manifest.posture_count}]"
            )

    def runner(cell, seed):
        spec = MPnSSpec(cell["m"], n, split_seed=seed, val_fraction=val_fraction)
        return run_experiment(
            "ours", target_records, target_manifest, auxiliary_records,
            spec, config.with_overrides(seed=seed),
        ).report

    return _sweep([{"m": m} for m in m_values], seeds, runner)


def ablate_samples(
    target_records: list[SampleRecord],
    target_manifest: DatasetManifest,
    auxiliary_records: list[SampleRecord],
    m: int,
    n_values: list[int],
    seeds: list[int],
    config: TrainConfig,
    val_fraction: float = 0.2,
) -> list[SweepRow]:
    """Mean accuracy of the full method as a function of the sample budget n."""
    if not n_values:
        raise ValueError("n_values must be non-empty")
    for n in n_values:
        if not (1 <= n <= target_manifest.samples_per_subject_posture):
            raise ValueError(
                f"n={n} out of range [1, {target_manifest.samples_per_subject_posture}]"
            )

    def runner(cell, seed):
        spec = MPnSSpec(m, cell["n"], split_seed=seed, val_fraction=val_fraction)
        return run_experiment(
            "ours", target_records, target_manifest, auxiliary_records,
            spec, config.with_overrides(seed=seed),
        ).report

    return _sweep([{"n": n} for n in n_values], seeds, runner)


def ablate_encoder_decoder(
    target_records: list[SampleRecord],
    target_manifest: DatasetManifest,
    auxiliary_records: list[SampleRecord],
    spec: MPnSSpec,
    seeds: list[int],
    config: TrainConfig,
    variants: tuple[str, ...] = ("small", "medium", "large"),
) -> list[SweepRow]:
    """Grid over encoder variant x decoder sharing for the full method."""
    from dataclasses import replace as dc_replace

    def runner(cell, seed):
        cfg = config.with_overrides(
            seed=seed,
            encoder=dc_replace(config.encoder, variant=cell["encoder"]),
            decoder_sharing=cell["decoder"],
        )
        run_spec = MPnSSpec(
            spec.m, spec.n, split_seed=seed, val_fraction=spec.val_fraction
        )
        return run_experiment(
            "ours", target_records, target_manifest, auxiliary_records,
            run_spec, cfg,
        ).report

    cells = [
        {"encoder": v, "decoder": s}
        for v in variants
        for s in ("shared", "independent")
    ]
    return _sweep(cells, seeds, runner)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def plot_confusion(report: RunReport, path: str | Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    confusion = np.array(report.confusion, dtype=np.float64)
    row_sums = confusion.sum(axis=1, keepdims=True)
    normed = np.divide(
        confusion, row_sums, out=np.zeros_like(confusion), where=row_sums > 0
    )
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(normed, cmap="Blues", vmin=0, vmax=1)
    for i in range(NUM_SUBJECTS):
        for j in range(NUM_SUBJECTS):
            if confusion[i, j]:
                ax.text(
                    j, i, f"{normed[i, j]:.2f}", ha="center", va="center",
                    fontsize=7, color="black" if normed[i, j] < 0.6 else "white",
                )
    ax.set_xlabel("predicted subject")
    ax.set_ylabel("true subject")
    ax.set_title(f"{report.method} ({report.m}P{report.n}S, acc {report.accuracy:.3f})")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(rows: list[SweepRow], x_key: str, path: str | Path, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [row.key[x_key] for row in rows]
    means = [row.mean for row in rows]
    stds = [row.std for row in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(xs, means, yerr=stds, marker="o", capsize=3)
    ax.set_xlabel(x_key)
    ax.set_ylabel("accuracy")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def reports_to_csv(reports: list[RunReport], path: str | Path) -> None:
    """One row per run: the shared schema every method emits."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "m", "n", "split_seed", "seed", "accuracy", "test_count"])
        for r in reports:
            writer.writerow(
                [r.method, r.m, r.n, r.split_seed, r.seed, repr(r.accuracy), r.test_count]
            )


def markdown_table(per_method_reports: dict[str, list[RunReport]]) -> str:
    """Markdown summary in the multi-run layout: one row per method."""
    if not per_method_reports:
        raise ValueError("no reports to tabulate")
    max_runs = max(len(v) for v in per_method_reports.values())
    header = (
        ["Method"]
        + [str(i + 1) for i in range(max_runs)]
        + ["mean ± std"]
    )
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "---|" * len(header),
    ]
    for method, reports in per_method_reports.items():
        agg = aggregate(reports)
        cells = [f"{r.accuracy:.4f}" for r in reports]
        cells += [""] * (max_runs - len(cells))
        lines.append(
            "| "
            + " | ".join([method] + cells + [f"{agg.mean:.4f} ± {agg.std:.4f}"])
            + " |"
        )
    return "\n".join(lines) + "\n"
