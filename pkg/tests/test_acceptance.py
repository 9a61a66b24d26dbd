"""Acceptance suite: every release criterion at its pinned tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion. Thresholds for the synthetic end-to-end benchmark were frozen
from the first passing run and act as regression bounds.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from zslproto import (
    MsasConfig,
    RunConfig,
    build_similarity_matrix,
    compute_seen_means,
    generate_prototype_set,
    gradient_check,
    harmonic_mean,
    init_classifier,
    loss_seen,
    loss_unseen,
    make_synthetic_world,
    rescore_attributes,
    ridge_code,
    run_pipeline,
    save_bundle,
    solve_similarity_row,
    total_loss,
)
from zslproto.cli import main
from zslproto.datatypes import AttributeMatrix

from oracles import bce_sum_loop, ridge_oracle


def ok(name):
    print(f"\nACCEPTANCE PASS: {name}")


# ---------------------------------------------------------------------------


def test_ridge_solver_oracle_equivalence():
    start = time.perf_counter()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 11))
        d_a = int(rng.integers(2, 21))
        rows = rng.standard_normal((k, d_a))
        target = rng.standard_normal(d_a)
        for lam in (0.01, 0.5, 1.0):
            got = ridge_code(target, rows, lam).coefficients
            want = ridge_oracle(rows, target, lam)
            assert np.allclose(got, want, rtol=1e-8, atol=1e-12), (seed, lam)

        n_cls = int(rng.integers(3, 13))
        all_rows = rng.standard_normal((n_cls, d_a))
        for phi in (0.01, 0.5, 1.0):
            got = solve_similarity_row(all_rows[0], all_rows, phi)
            want = ridge_oracle(all_rows, all_rows[0], phi)
            assert np.allclose(got, want, rtol=1e-8, atol=1e-12), (seed, phi)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"oracle equivalence took {elapsed:.2f}s"
    ok(f"ridge-solver oracle equivalence, 100 systems x 3 strengths ({elapsed:.2f}s)")


def test_prototype_recovery_in_noiseless_world():
    start = time.perf_counter()
    dataset, attrs, truth = make_synthetic_world(7, 8, 4, 32, 16, 25, noise_scale=0.0)
    means = compute_seen_means(dataset)
    protos = generate_prototype_set(attrs, means, 3, 1e-8, 1e-8, seed=7)
    worst = 0.0
    for i in range(len(protos)):
        planted = truth[protos.labels[i] - 8]
        rel = np.linalg.norm(protos.prototypes[i] - planted) / np.linalg.norm(planted)
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    assert worst < 1e-3, f"worst relative recovery error {worst}"
    assert elapsed < 1.0, f"recovery took {elapsed:.2f}s"
    ok(f"prototype recovery, worst rel err {worst:.2e} ({elapsed:.2f}s)")


def test_gradient_check_on_seeded_tiny_models():
    start = time.perf_counter()
    dataset, attrs, _ = make_synthetic_world(3, 3, 2, 6, 4, 8, noise_scale=0.3)
    sim = build_similarity_matrix(attrs, 0.1)
    feats = dataset.split_features("train_seen")[:5]
    labels = dataset.split_labels("train_seen")[:5]
    worst = 0.0
    for seed in range(5):
        model = init_classifier(attrs.attr_dim, 6, 8, 8, seed=seed)
        err = gradient_check(model, feats, labels, attrs, sim, beta=0.2, step=1e-5)
        assert err < 1e-4, f"seed {seed}: max rel err {err}"
        worst = max(worst, err)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"gradient checks took {elapsed:.2f}s"
    ok(f"gradient check on 5 tiny models, worst rel err {worst:.2e} ({elapsed:.2f}s)")


def test_loss_decomposition_identity():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        batch = int(rng.integers(1, 8))
        num_seen = int(rng.integers(1, 6))
        num_unseen = int(rng.integers(1, 6))
        scores = rng.uniform(0.01, 0.99, size=(batch, num_seen + num_unseen))
        onehot = np.zeros_like(scores)
        onehot[np.arange(batch), rng.integers(0, num_seen + num_unseen, batch)] = 1.0
        split = total_loss(
            loss_seen(scores[:, :num_seen], onehot[:, :num_seen]),
            loss_unseen(
                scores[:, num_seen:], onehot[:, num_seen:], np.ones((batch, num_unseen))
            ),
            beta=1.0,
        )
        joint = bce_sum_loop(scores, onehot)
        worst = max(worst, abs(split - joint))
    assert worst < 1e-10, f"worst decomposition gap {worst}"
    ok(f"loss decomposition identity, worst gap {worst:.2e}")


def test_similarity_rows_are_stochastic():
    cases = []
    for seed in range(18):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 9))
        cases.append((rng.standard_normal((n, 7)), int(rng.integers(1, n))))
    dup = np.random.default_rng(100).standard_normal((6, 7))
    dup[4] = dup[1]
    cases.append((dup, 3))
    cases.append((np.tile(np.arange(7.0), (5, 1)), 2))  # all rows identical
    for values, num_seen in cases:
        attrs = AttributeMatrix(
            values=values, num_seen=num_seen, num_unseen=values.shape[0] - num_seen
        )
        sim = build_similarity_matrix(attrs, phi=0.1)
        assert np.all(np.abs(sim.values.sum(axis=1) - 1.0) <= 1e-9)
        assert sim.values.min() >= 0.0
        assert sim.values.max() <= 1.0
    ok(f"similarity row-stochasticity over {len(cases)} matrices")


def test_attribute_rescoring_algebra():
    rng = np.random.default_rng(1)
    for _ in range(25):
        values = rng.standard_normal((6, 9))
        weight = float(rng.uniform(0.005, 3.0))
        threshold = float(rng.uniform(-1.5, 1.5))
        attrs = AttributeMatrix(values=values, num_seen=3, num_unseen=3)
        out = rescore_attributes(attrs, MsasConfig(weight, threshold)).values
        mask = values > threshold
        expected = weight * values + weight * values * mask
        assert np.all(np.abs(out - expected) <= np.spacing(np.abs(expected)))

    tie = AttributeMatrix(values=np.array([[0.8, 0.8, 0.9]]), num_seen=1, num_unseen=0)
    out = rescore_attributes(tie, MsasConfig(weight=1.0, threshold=0.8)).values
    assert out[0, 0] == 0.8 and out[0, 1] == 0.8 and out[0, 2] == 1.8
    ok("attribute re-scoring algebra exact to 1 ulp, ties untouched")


def test_harmonic_mean_fixture():
    assert harmonic_mean(67.6, 82.3) == pytest.approx(74.2, abs=0.05)
    assert harmonic_mean(42.5, 49.9) == pytest.approx(45.9, abs=0.05)
    ok("harmonic-mean fixtures 74.2 and 45.9 within 0.05")


# ---------------------------------------------------------------------------
# synthetic end-to-end benchmark (thresholds frozen from the first passing run)

E2E_SEED = 23
E2E_NOISE = 0.7


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e")
    dataset, attrs, _ = make_synthetic_world(
        E2E_SEED, 8, 4, 32, 16, samples_per_seen_class=100, noise_scale=E2E_NOISE
    )
    bundle = root / "bundle"
    save_bundle(dataset, attrs, bundle)
    config = RunConfig(
        bundle=bundle,
        out=root / "full",
        seed=E2E_SEED,
        msas_enabled=False,
        per_class=5,
        dpsr_enabled=True,
        phi=0.1,
        beta=0.2,
    )
    start = time.perf_counter()
    full = run_pipeline(config)
    runtime = time.perf_counter() - start
    ablated = run_pipeline(config.derive(dpsr_enabled=False, out=root / "no_dpsr"))
    return {"full": full, "ablated": ablated, "runtime": runtime, "out": root / "full"}


def test_end_to_end_synthetic_benchmark(e2e):
    report, runtime = e2e["full"], e2e["runtime"]
    assert report.harmonic >= 85.0, f"H={report.harmonic}"
    assert report.t1_czsl >= 90.0, f"T1={report.t1_czsl}"
    assert runtime < 60.0, f"pipeline took {runtime:.1f}s"
    history = json.loads((e2e["out"] / "history.json").read_text())["epoch_mean_loss"]
    assert history[-1] < 0.1 * history[0], f"loss only fell {history[0]} -> {history[-1]}"
    ok(
        f"end-to-end synthetic benchmark: T1={report.t1_czsl:.1f} "
        f"H={report.harmonic:.1f} in {runtime:.1f}s"
    )


def test_disabling_similarity_masks_hurts_generalized_score(e2e):
    full, ablated = e2e["full"], e2e["ablated"]
    assert ablated.harmonic < full.harmonic, (
        f"expected drop: full H={full.harmonic}, ablated H={ablated.harmonic}"
    )
    ok(
        f"ablation direction: H {full.harmonic:.1f} -> {ablated.harmonic:.1f} "
        "without similarity masks"
    )


def test_run_invocations_are_byte_identical(tmp_path):
    bundle = tmp_path / "bundle"
    assert main(
        ["make-synthetic", "--seed", "9", "--num-seen", "4", "--num-unseen", "2",
         "--feature-dim", "8", "--attr-dim", "6", "--samples", "16", "--noise", "0.4",
         "--out", str(bundle)]
    ) == 0
    args = ["run", "--bundle", str(bundle), "--seed", "9", "--no-msas",
            "--per-class", "2", "--epochs", "3", "--batch", "8"]
    assert main([*args, "--out", str(tmp_path / "r1")]) == 0
    assert main([*args, "--out", str(tmp_path / "r2")]) == 0
    a = (tmp_path / "r1" / "report.json").read_bytes()
    b = (tmp_path / "r2" / "report.json").read_bytes()
    assert a == b
    ok("determinism: identical run invocations give byte-identical reports")


def test_real_data_smoke_if_bundle_available():
    """Non-gating: runs only when a converted benchmark bundle is on disk."""
    candidate = os.environ.get("ZSLPROTO_AWA2_BUNDLE", "data/awa2_bundle")
    bundle = Path(candidate)
    if not (bundle / "metadata.json").exists():
        pytest.skip(f"no real-data bundle at {bundle}; smoke test not gating")
    config = RunConfig(
        bundle=bundle,
        out=bundle.parent / "awa2_smoke_run",
        seed=0,
        msas_enabled=True,
        msas=MsasConfig(weight=0.08, threshold=0.8),
        per_class=90,
        lambda_min=1.0,
        lambda_max=1.02,
        dpsr_enabled=True,
        phi=0.1,
        beta=0.2,
    )
    report = run_pipeline(config)
    assert report.harmonic > 0.0
    ok(f"real-data smoke: H={report.harmonic:.2f}")
