"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The end-to-end benchmark (criteria 6 and 7) trains on the full
synthetic presets with the tiny encoder and a reduced epoch budget; expect
around twenty minutes on a desktop CPU. Everything else finishes in seconds.
"""

import math
import time

import numpy as np
import pytest
import torch

from pressure_id.augment import AugmentConfig, augment_frame, translate_frame
from pressure_id.baselines import knn_predict
from pressure_id.data import (
    FRAME_COLS,
    FRAME_ROWS,
    SyntheticConfig,
    frames_array,
    generate_synthetic,
    load_dataset,
    save_dataset,
    subject_labels,
)
from pressure_id.evaluation import run_experiment
from pressure_id.losses import (
    ContrastiveBatch,
    LossWeights,
    cross_entropy,
    supcon_loss,
    total_loss,
)
from pressure_id.models import EncoderConfig, init_model, project_for_contrast
from pressure_id.splits import MPnSSpec, split_mpns, take
from pressure_id.training import TrainConfig, train

from oracles import knn_oracle, supcon_oracle
from test_data import _random_dataset

# Budget for the end-to-end directional runs (criteria 6 and 7); the
# criterion allows up to 50.
BENCH_EPOCHS = 25
BENCH_SEEDS = [1, 2, 3, 4, 5]
TREND_SEEDS = [1, 2, 3]


def _check(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def chr_full():
    return generate_synthetic(SyntheticConfig(posture_count=12, seed=42))


@pytest.fixture(scope="module")
def bed_full():
    return generate_synthetic(SyntheticConfig(posture_count=6, seed=42))


@pytest.fixture(scope="module")
def bench_config():
    return TrainConfig(
        encoder=EncoderConfig(variant="tiny", embedding_dim=64),
        epochs=BENCH_EPOCHS,
    )


@pytest.fixture(scope="module")
def benchmark_runs(chr_full, bed_full, bench_config):
    """All training runs shared by criteria 6 and 7, keyed (method, m, seed)."""
    chr_records, chr_manifest = chr_full
    bed_records, _ = bed_full
    accuracies: dict[tuple[str, int, int], float] = {}
    for seed in BENCH_SEEDS:
        for method in ("ours", "nil", "aug"):
            out = run_experiment(
                method, chr_records, chr_manifest, bed_records,
                MPnSSpec(m=2, n=50, split_seed=seed),
                bench_config.with_overrides(seed=seed),
            )
            accuracies[(method, 2, seed)] = out.report.accuracy
    for seed in TREND_SEEDS:
        out = run_experiment(
            "ours", chr_records, chr_manifest, bed_records,
            MPnSSpec(m=6, n=50, split_seed=seed),
            bench_config.with_overrides(seed=seed),
        )
        accuracies[("ours", 6, seed)] = out.report.accuracy
    return accuracies


def test_criterion_1_supcon_oracle_equivalence():
    rng = np.random.default_rng(2024)
    taus = [0.05, 0.1, 0.5, 1.0]
    t0 = time.time()
    worst = 0.0
    checked = 0
    while checked < 200:
        n = int(rng.integers(4, 17))
        d = int(rng.integers(2, 9))
        classes = int(rng.integers(1, 5))
        tau = taus[int(rng.integers(0, len(taus)))]
        z = rng.standard_normal((n, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        labels = rng.integers(0, classes, size=n)
        if not any((labels == labels[i]).sum() > 1 for i in range(n)):
            continue  # no positives anywhere: the loss is undefined
        ours = float(
            supcon_loss(
                ContrastiveBatch(
                    torch.tensor(z, dtype=torch.float64),
                    torch.tensor(labels, dtype=torch.int64),
                    tau,
                )
            )
        )
        reference = supcon_oracle(z, labels, tau)
        worst = max(worst, abs(ours - reference))
        checked += 1
    elapsed = time.time() - t0
    _check(
        "criterion 1 (supcon oracle equivalence)",
        worst < 1e-6 and elapsed < 10,
        f"max |diff| = {worst:.2e} over 200 batches in {elapsed:.1f}s",
    )


def test_criterion_2_analytic_loss_values():
    uniform_ce = float(
        cross_entropy(
            torch.zeros((6, 8), dtype=torch.float64),
            torch.tensor([0, 1, 2, 3, 4, 5]),
        )
    )
    ce_err = abs(uniform_ce - math.log(8))

    z = torch.tensor(np.tile([0.6, 0.8, 0.0], (4, 1)), dtype=torch.float64)
    same = torch.tensor([3, 3, 3, 3])
    supcon_err = abs(
        float(supcon_loss(ContrastiveBatch(z, same, 0.1))) - math.log(3)
    )

    exact = total_loss(2.0, 2.0, 1.0, LossWeights(0.15, 0.15, 0.7))
    _check(
        "criterion 2 (analytic loss values)",
        ce_err < 1e-9 and supcon_err < 1e-6 and exact == 1.3,
        f"uniform-CE err {ce_err:.1e}, supcon err {supcon_err:.1e}, "
        f"total_loss = {exact!r}",
    )


def test_criterion_3_gradient_check():
    t0 = time.time()
    torch.manual_seed(0)
    config = EncoderConfig(variant="tiny", embedding_dim=16)
    target, auxiliary = init_model(config, "independent", seed=0)
    target.double()
    auxiliary.double()

    rng = np.random.default_rng(17)
    x_t = torch.tensor(
        rng.uniform(0, 30, size=(4, 1, FRAME_ROWS, FRAME_COLS)), dtype=torch.float64
    )
    y_t = torch.tensor([0, 1, 2, 3])
    x_a = torch.tensor(
        rng.uniform(0, 30, size=(4, 1, FRAME_ROWS, FRAME_COLS)), dtype=torch.float64
    )
    y_a = torch.tensor([0, 1, 2, 3])
    weights = LossWeights(0.15, 0.15, 0.7)

    params = list(target.parameters()) + list(auxiliary.parameters())

    def loss_value() -> torch.Tensor:
        z_t = target(x_t)
        z_a = auxiliary(x_a)
        ce1 = cross_entropy(target.decoder(z_t), y_t)
        ce2 = cross_entropy(auxiliary.decoder(z_a), y_a)
        normed, _ = project_for_contrast(torch.cat([z_t, z_a]))
        con = supcon_loss(
            ContrastiveBatch(normed, torch.cat([y_t, y_a]), 0.10)
        )
        return total_loss(ce1, ce2, con, weights)

    loss = loss_value()
    loss.backward()
    grads = [p.grad.detach().clone().reshape(-1) for p in params]
    sizes = [g.numel() for g in grads]
    total_size = sum(sizes)

    coords = rng.choice(total_size, size=200, replace=False)
    h = 1e-4
    failures = 0
    flat_params = [p.reshape(-1) for p in params]
    offsets = np.cumsum([0] + sizes)
    with torch.no_grad():
        for coord in coords:
            pi = int(np.searchsorted(offsets, coord, side="right") - 1)
            local = int(coord - offsets[pi])
            vec = flat_params[pi]
            original = float(vec[local])
            vec[local] = original + h
            up = float(loss_value())
            vec[local] = original - h
            down = float(loss_value())
            vec[local] = original
            fd = (up - down) / (2 * h)
            an = float(grads[pi][local])
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
            if rel > 1e-3:
                failures += 1
    elapsed = time.time() - t0
    fraction_ok = 1 - failures / 200
    _check(
        "criterion 3 (gradient check)",
        fraction_ok >= 0.95 and elapsed < 60,
        f"{fraction_ok * 100:.1f}% of 200 sampled coordinates within 1e-3 "
        f"in {elapsed:.1f}s",
    )


def test_criterion_4_augmentation_invariants():
    t0 = time.time()
    rng = np.random.default_rng(31)

    frame = rng.uniform(0, 40, size=(FRAME_ROWS, FRAME_COLS)).astype(np.float32)
    flip = AugmentConfig(p_flip=1.0, p_rotate=0.0, p_translate=0.0)
    flip_ok = np.array_equal(
        augment_frame(augment_frame(frame, flip, rng), flip, rng), frame
    )

    identity = AugmentConfig(p_flip=0.0, p_rotate=0.0, p_translate=0.0)
    identity_ok = np.array_equal(augment_frame(frame, identity, rng), frame)

    interior = np.zeros((FRAME_ROWS, FRAME_COLS), dtype=np.float32)
    interior[10:40, 8:30] = rng.uniform(1, 5, size=(30, 22)).astype(np.float32)
    total = math.fsum(interior.ravel())
    translate_ok = all(
        math.fsum(translate_frame(interior, dr, dc).ravel()) == total
        for dr in (-4, -1, 0, 2, 4)
        for dc in (-4, 0, 3, 4)
    )

    config = AugmentConfig()
    non_negative = True
    for _ in range(1000):
        sample = rng.uniform(0, 40, size=(FRAME_ROWS, FRAME_COLS)).astype(np.float32)
        if np.any(augment_frame(sample, config, rng) < 0):
            non_negative = False
            break
    elapsed = time.time() - t0
    _check(
        "criterion 4 (augmentation invariants)",
        flip_ok and identity_ok and translate_ok and non_negative and elapsed < 10,
        f"flip involution {flip_ok}, identity {identity_ok}, translation "
        f"total {translate_ok}, non-negativity {non_negative}, {elapsed:.1f}s",
    )


def test_criterion_5_data_layer(chr_full, tmp_path):
    t0 = time.time()
    round_trip_ok = True
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        records, manifest = _random_dataset(
            seed,
            subjects=int(rng.integers(1, 4)),
            postures=int(rng.integers(1, 4)),
            samples=int(rng.integers(1, 4)),
        )
        path = tmp_path / f"r{seed}.prsd"
        save_dataset(records, manifest, path)
        loaded, _ = load_dataset(path)
        round_trip_ok &= all(a == b for a, b in zip(records, loaded))

    config = SyntheticConfig(posture_count=12, seed=42)
    for name in ("g1", "g2"):
        records, manifest = generate_synthetic(config)
        save_dataset(records, manifest, tmp_path / f"{name}.prsd")
    determinism_ok = (
        (tmp_path / "g1.prsd").read_bytes() == (tmp_path / "g2.prsd").read_bytes()
    )

    chr_records, chr_manifest = chr_full
    split = split_mpns(chr_records, chr_manifest, MPnSSpec(m=2, n=50, split_seed=1))
    train_count_ok = len(split.train) == 800
    test_postures = {chr_records[i].posture_id for i in split.test}
    coverage_ok = test_postures == set(range(12))
    elapsed = time.time() - t0
    _check(
        "criterion 5 (data layer)",
        round_trip_ok and determinism_ok and train_count_ok and coverage_ok
        and elapsed < 30,
        f"round-trip {round_trip_ok}, generator determinism {determinism_ok}, "
        f"|train|={len(split.train)}, test postures {len(test_postures)}/12, "
        f"{elapsed:.1f}s",
    )


def test_criterion_6_directional_benchmark(benchmark_runs):
    means = {
        method: float(
            np.mean([benchmark_runs[(method, 2, s)] for s in BENCH_SEEDS])
        )
        for method in ("ours", "nil", "aug")
    }
    ours_margin_ok = means["ours"] >= means["nil"] + 0.02
    aug_ok = means["aug"] >= means["nil"]
    _check(
        "criterion 6 (2P50S directional result)",
        ours_margin_ok and aug_ok,
        f"ours {means['ours']:.4f}, aug {means['aug']:.4f}, nil {means['nil']:.4f} "
        f"(ours-nil = {means['ours'] - means['nil']:+.4f}, need >= +0.02; "
        f"aug-nil = {means['aug'] - means['nil']:+.4f}, need >= 0)",
    )


def test_criterion_7_posture_count_trend(benchmark_runs):
    mean_m2 = float(np.mean([benchmark_runs[("ours", 2, s)] for s in TREND_SEEDS]))
    mean_m6 = float(np.mean([benchmark_runs[("ours", 6, s)] for s in TREND_SEEDS]))
    _check(
        "criterion 7 (posture-count trend)",
        mean_m6 >= mean_m2,
        f"m=6 mean {mean_m6:.4f} vs m=2 mean {mean_m2:.4f} over 3 seeds",
    )


def test_criterion_8_knn_oracle(chr_full):
    t0 = time.time()
    chr_records, chr_manifest = chr_full
    split = split_mpns(chr_records, chr_manifest, MPnSSpec(m=2, n=50, split_seed=1))
    train_recs = take(chr_records, split.train)
    train_x = frames_array(train_recs)
    train_y = subject_labels(train_recs)
    rng = np.random.default_rng(8)
    query_idx = rng.choice(split.test, size=100, replace=False)
    queries = frames_array([chr_records[i] for i in query_idx])
    preds = knn_predict(train_x, train_y, queries, k=5)
    expected = [knn_oracle(train_x, train_y, q, 5) for q in queries]
    matches = int(np.sum(preds == np.array(expected)))
    elapsed = time.time() - t0
    _check(
        "criterion 8 (KNN oracle agreement)",
        matches == 100 and elapsed < 10,
        f"{matches}/100 queries agree exactly in {elapsed:.1f}s",
    )


def test_criterion_9_training_determinism(small_chr, small_bed, tmp_path):
    records, manifest = small_chr
    aux_records, _ = small_bed
    split = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=0))
    train_recs = take(records, split.train)
    val_recs = take(records, split.val)
    config = TrainConfig(
        encoder=EncoderConfig(variant="tiny", embedding_dim=32),
        epochs=3,
        batch_size=16,
        seed=11,
    )
    paths = []
    for name in ("one", "two"):
        result = train(train_recs, val_recs, aux_records, config)
        path = tmp_path / f"history-{name}.csv"
        result.history.to_csv(path)
        paths.append(path)
    identical = paths[0].read_bytes() == paths[1].read_bytes()
    _check(
        "criterion 9 (run-for-run determinism)",
        identical,
        "two identical-config runs wrote identical history.csv files",
    )
