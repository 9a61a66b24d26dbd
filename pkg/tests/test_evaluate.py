import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zslproto import (
    DataError,
    FeatureDataset,
    PrototypeSet,
    build_similarity_matrix,
    compute_seen_means,
    evaluate_model,
    generate_prototype_set,
    harmonic_mean,
    init_classifier,
    kmeans_subclusters,
    make_synthetic_world,
    per_class_top1,
    predict_czsl,
    predict_gzsl,
    prototype_alignment,
    train,
    TrainConfig,
    augment_training_set,
)

from oracles import argmax_scan, per_class_tally


# ---------------------------------------------------------------------------
# prediction


def test_czsl_restricts_to_unseen_columns():
    scores = np.array([[0.1, 0.2, 0.3, 0.9, 0.8]])
    assert predict_czsl(scores, num_seen=3)[0] == 3


def test_czsl_tie_breaks_to_lower_index():
    scores = np.array([[0.0, 0.0, 0.0, 0.5, 0.5]])
    assert predict_czsl(scores, num_seen=3)[0] == 3


def test_gzsl_cases():
    assert predict_gzsl(np.array([[0.9, 0.2, 0.1, 0.3, 0.4]]))[0] == 0  # seen wins
    assert predict_gzsl(np.array([[0.1, 0.2, 0.1, 0.3, 0.8]]))[0] == 4  # unseen wins
    assert predict_gzsl(np.array([[0.7, 0.2, 0.1, 0.7, 0.3]]))[0] == 0  # tie: lowest


def test_predictions_match_scan_oracle():
    rng = np.random.default_rng(0)
    scores = rng.uniform(size=(20, 7))
    gzsl = predict_gzsl(scores)
    czsl = predict_czsl(scores, num_seen=4)
    for i in range(20):
        assert gzsl[i] == argmax_scan(scores[i])
        assert czsl[i] == 4 + argmax_scan(scores[i][4:])


def test_gzsl_restricted_to_unseen_agrees_with_czsl():
    rng = np.random.default_rng(1)
    for _ in range(20):
        scores = rng.uniform(size=(5, 6))
        num_seen = int(rng.integers(1, 5))
        restricted = predict_gzsl(scores[:, num_seen:]) + num_seen
        assert np.array_equal(restricted, predict_czsl(scores, num_seen))


# ---------------------------------------------------------------------------
# metrics


def test_all_correct_is_hundred():
    assert per_class_top1([0, 1, 2], [0, 1, 2], [0, 1, 2]) == 100.0


def test_classes_weigh_equally_regardless_of_size():
    # class 0: 10/10 correct, class 1: 0/1 correct -> (100 + 0) / 2
    preds = [0] * 10 + [0]
    labels = [0] * 10 + [1]
    assert per_class_top1(preds, labels, [0, 1]) == 50.0


def test_per_class_matches_tally_oracle():
    rng = np.random.default_rng(2)
    labels = rng.integers(0, 4, size=40)
    labels[:4] = np.arange(4)
    preds = rng.integers(0, 4, size=40)
    got = per_class_top1(preds, labels, range(4))
    assert got == pytest.approx(per_class_tally(preds, labels, range(4)), abs=1e-12)


def test_single_class_subset_is_plain_accuracy():
    preds = [0, 1, 0, 0]
    labels = [0, 0, 0, 0]
    assert per_class_top1(preds, labels, [0]) == 75.0


def test_missing_class_samples_rejected():
    with pytest.raises(DataError, match="no test samples"):
        per_class_top1([0], [0], [0, 1])
    with pytest.raises(DataError, match="non-empty"):
        per_class_top1([0], [0], [])


def test_harmonic_mean_of_equal_inputs():
    assert harmonic_mean(80.0, 80.0) == pytest.approx(80.0, abs=1e-12)


def test_harmonic_mean_published_rows():
    assert harmonic_mean(67.6, 82.3) == pytest.approx(74.2, abs=0.05)
    assert harmonic_mean(42.5, 49.9) == pytest.approx(45.9, abs=0.05)


def test_harmonic_mean_zero_cases():
    assert harmonic_mean(0.0, 0.0) == 0.0
    assert harmonic_mean(0.0, 50.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(u=st.floats(0, 100), s=st.floats(0, 100))
def test_harmonic_mean_bounds(u, s):
    h = harmonic_mean(u, s)
    assert h <= (u + s) / 2 + 1e-9
    assert h <= 2 * min(u, s) + 1e-9
    assert h >= 0


# ---------------------------------------------------------------------------
# full evaluation


@pytest.fixture(scope="module")
def trained_setup():
    dataset, attrs, _ = make_synthetic_world(21, 3, 2, 6, 4, 12, 0.3)
    sim = build_similarity_matrix(attrs, 0.1)
    protos = generate_prototype_set(attrs, compute_seen_means(dataset), 3, 1.0, 1.02, seed=21)
    model = init_classifier(attrs.attr_dim, 6, 16, 16, seed=21)
    trained, _ = train(
        model,
        augment_training_set(dataset, protos),
        attrs,
        sim,
        TrainConfig(epochs=15, batch_size=8, seed=21),
    )
    return dataset, attrs, trained, protos


def test_report_fields_and_ranges(trained_setup):
    dataset, attrs, trained, _ = trained_setup
    report = evaluate_model(trained, dataset, attrs, config_echo={"seed": 21})
    for value in (report.t1_czsl, report.acc_unseen, report.acc_seen, report.harmonic):
        assert 0.0 <= value <= 100.0
    assert len(report.per_class) == 5
    assert report.harmonic == pytest.approx(
        harmonic_mean(report.acc_unseen, report.acc_seen), abs=1e-12
    )
    assert report.config_echo == {"seed": 21}


def test_chunked_scoring_matches_single_batch():
    from zslproto.classifier import compatibility_scores, encode_semantics
    from zslproto.evaluate import _scores_chunked

    # enough classes that the 50k fused-row cap forces several slices
    rng = np.random.default_rng(8)
    model = init_classifier(attr_dim=3, feature_dim=4, encoder_hidden=4, scorer_hidden=4, seed=8)
    embeds = encode_semantics(model, rng.standard_normal((5000, 3)))
    features = rng.standard_normal((25, 4))
    chunked = _scores_chunked(model, features, embeds)
    full = compatibility_scores(model, features, embeds)
    assert np.array_equal(chunked, full)


def test_report_invariant_to_test_row_order(trained_setup):
    dataset, attrs, trained, _ = trained_setup
    rng = np.random.default_rng(5)
    splits = {
        name: rng.permutation(dataset.splits[name]) for name in dataset.splits
    }
    shuffled = FeatureDataset(
        features=dataset.features,
        labels=dataset.labels,
        splits=splits,
        num_seen=dataset.num_seen,
        num_unseen=dataset.num_unseen,
    )
    a = evaluate_model(trained, dataset, attrs)
    b = evaluate_model(trained, shuffled, attrs)
    assert a.to_dict() == b.to_dict()


# ---------------------------------------------------------------------------
# k-means sub-clusters


def test_k_equals_sample_count_returns_the_samples():
    rng = np.random.default_rng(3)
    points = rng.standard_normal((6, 3))
    centroids = kmeans_subclusters(points, k=6, seed=0)
    got = sorted(map(tuple, np.round(centroids, 12)))
    expected = sorted(map(tuple, np.round(points, 12)))
    assert got == expected


def test_two_separated_blobs_are_found():
    rng = np.random.default_rng(4)
    blob_a = rng.normal(0.0, 0.05, size=(30, 2))
    blob_b = rng.normal(5.0, 0.05, size=(30, 2))
    centroids = kmeans_subclusters(np.vstack([blob_a, blob_b]), k=2, seed=1)
    centroids = centroids[np.argsort(centroids[:, 0])]
    assert np.allclose(centroids[0], blob_a.mean(axis=0), atol=0.1)
    assert np.allclose(centroids[1], blob_b.mean(axis=0), atol=0.1)


def test_kmeans_deterministic_under_seed():
    rng = np.random.default_rng(5)
    points = rng.standard_normal((25, 4))
    a = kmeans_subclusters(points, k=3, seed=9)
    b = kmeans_subclusters(points, k=3, seed=9)
    assert np.array_equal(a, b)


def test_k_larger_than_samples_rejected():
    with pytest.raises(DataError):
        kmeans_subclusters(np.zeros((3, 2)), k=4, seed=0)


# ---------------------------------------------------------------------------
# alignment study


def test_prototypes_equal_to_centroids_have_zero_distance():
    rng = np.random.default_rng(6)
    feats = rng.standard_normal((12, 3)) + 4.0
    labels = np.full(12, 2)
    centroids = kmeans_subclusters(feats, k=2, seed=0 + 2)
    protos = PrototypeSet(
        prototypes=centroids, labels=[2, 2], lambdas=[1.0, 1.0], num_seen=2, num_unseen=1
    )
    out = prototype_alignment(protos, feats, labels, k=2, seed=0)
    assert out[2] == pytest.approx(0.0, abs=1e-12)


def test_zero_noise_world_aligns_tightly():
    dataset, attrs, _ = make_synthetic_world(31, 6, 3, 16, 8, 12, noise_scale=0.0)
    protos = generate_prototype_set(attrs, compute_seen_means(dataset), 3, 1e-8, 1e-8, seed=31)
    out = prototype_alignment(
        protos,
        dataset.split_features("test_unseen"),
        dataset.split_labels("test_unseen"),
        k=1,
        seed=31,
    )
    assert all(v < 0.05 for v in out.values())


def test_random_prototypes_align_worse_than_synthesized(trained_setup):
    dataset, attrs, _, protos = trained_setup
    rng = np.random.default_rng(13)
    random_protos = PrototypeSet(
        prototypes=rng.standard_normal(protos.prototypes.shape) * 10,
        labels=protos.labels,
        lambdas=protos.lambdas,
        num_seen=protos.num_seen,
        num_unseen=protos.num_unseen,
    )
    feats = dataset.split_features("test_unseen")
    labels = dataset.split_labels("test_unseen")
    good = prototype_alignment(protos, feats, labels, k=2, seed=7)
    bad = prototype_alignment(random_protos, feats, labels, k=2, seed=7)
    assert np.mean(list(bad.values())) > np.mean(list(good.values()))


def test_insufficient_samples_for_k(trained_setup):
    dataset, attrs, _, protos = trained_setup
    with pytest.raises(DataError, match="need >= k"):
        prototype_alignment(
            protos,
            dataset.split_features("test_unseen"),
            dataset.split_labels("test_unseen"),
            k=1000,
            seed=0,
        )
