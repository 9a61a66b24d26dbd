import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zslproto import (
    ConfigError,
    DataError,
    NumericalError,
    TrainConfig,
    augment_training_set,
    compute_seen_means,
    encode_semantics,
    fuse,
    generate_prototype_set,
    gradient_check,
    init_classifier,
    load_model,
    loss_seen,
    loss_unseen,
    save_model,
    score,
    total_loss,
    train,
)
from zslproto.classifier import (
    LEAKY_SLOPE,
    PARAM_NAMES,
    SCORE_EPS,
    ContrastiveClassifier,
    compatibility_scores,
)

from oracles import bce_sum_loop, encoder_forward_loop, masked_bce_sum_loop, score_forward_loop


def zero_model(attr_dim=4, feature_dim=6, hidden=8):
    return init_classifier(attr_dim, feature_dim, hidden, hidden, seed=0, zero_init=True)


# ---------------------------------------------------------------------------
# forward passes


def test_zero_network_encodes_to_zero():
    model = zero_model()
    out = encode_semantics(model, np.ones((3, 4)))
    assert np.array_equal(out, np.zeros((3, 6)))


def test_identity_like_encoder_passes_positive_inputs_through():
    eye = {
        "enc_w1": np.eye(4),
        "enc_b1": np.zeros(4),
        "enc_w2": np.eye(4),
        "enc_b2": np.zeros(4),
        "sco_w1": np.zeros((4, 4)),
        "sco_b1": np.zeros(4),
        "sco_w2": np.zeros(4),
        "sco_b2": np.zeros(()),
    }
    model = ContrastiveClassifier(
        attr_dim=4, feature_dim=4, encoder_hidden=4, scorer_hidden=4, params=eye
    )
    rows = np.array([[0.5, 1.0, 2.0, 0.25]])
    assert np.array_equal(encode_semantics(model, rows), rows)


def test_encoder_matches_loop_oracle():
    model = init_classifier(5, 7, 9, 9, seed=11)
    row = np.random.default_rng(2).standard_normal(5)
    expected = encoder_forward_loop(model.params, row, LEAKY_SLOPE)
    got = encode_semantics(model, row)[0]
    assert np.allclose(got, expected, rtol=1e-12, atol=1e-14)


def test_fuse_examples():
    assert np.array_equal(fuse([1.0, 2.0], [3.0, 4.0]), [3.0, 8.0])
    f = np.array([0.3, -2.0, 5.0])
    assert np.array_equal(fuse(f, np.ones(3)), f)
    assert np.array_equal(fuse(np.zeros(3), f), np.zeros(3))
    with pytest.raises(DataError):
        fuse(np.ones(3), np.ones(4))


def test_zero_network_scores_half():
    assert score(zero_model(), np.ones(6)) == 0.5


def test_saturated_logit_clamps():
    model = zero_model()
    model.params["sco_b2"] = np.asarray(50.0)
    assert score(model, np.ones(6)) == 1.0 - SCORE_EPS
    model.params["sco_b2"] = np.asarray(-50.0)
    assert score(model, np.ones(6)) == SCORE_EPS


def test_score_matches_loop_oracle():
    model = init_classifier(5, 7, 9, 9, seed=13)
    rng = np.random.default_rng(3)
    fused = rng.standard_normal(7)
    expected = score_forward_loop(model.params, fused, SCORE_EPS)
    assert math.isclose(score(model, fused), expected, rel_tol=1e-12)


def test_batch_scores_agree_with_single_vector_path():
    model = init_classifier(4, 6, 8, 8, seed=5)
    rng = np.random.default_rng(6)
    feats = rng.standard_normal((3, 6))
    attrs = rng.standard_normal((5, 4))
    embeds = encode_semantics(model, attrs)
    batch = compatibility_scores(model, feats, embeds)
    for i in range(3):
        for j in range(5):
            assert math.isclose(
                batch[i, j], score(model, fuse(feats[i], embeds[j])), rel_tol=1e-12
            )


# ---------------------------------------------------------------------------
# losses


def test_midpoint_bce():
    val = loss_seen(np.array([[0.5]]), np.array([[1.0]]))
    assert math.isclose(val, math.log(2), rel_tol=1e-12)


def test_perfect_prediction_loss_is_tiny():
    val = loss_seen(np.array([[1.0 - SCORE_EPS]]), np.array([[1.0]]))
    assert val == pytest.approx(SCORE_EPS, rel=1e-6)


def test_loss_seen_matches_loop_oracle():
    rng = np.random.default_rng(7)
    scores = rng.uniform(0.01, 0.99, size=(3, 4))
    onehot = np.zeros((3, 4))
    onehot[np.arange(3), rng.integers(0, 4, 3)] = 1.0
    assert math.isclose(loss_seen(scores, onehot), bce_sum_loop(scores, onehot), rel_tol=1e-12)


def test_loss_seen_shape_and_range_checks():
    with pytest.raises(DataError):
        loss_seen(np.ones((2, 3)) * 0.5, np.ones((2, 2)))
    with pytest.raises(DataError):
        loss_seen(np.array([[1.0]]), np.array([[1.0]]))


def test_unit_masks_reduce_to_plain_bce():
    rng = np.random.default_rng(8)
    scores = rng.uniform(0.01, 0.99, size=(4, 3))
    onehot = np.zeros((4, 3))
    onehot[np.arange(4), rng.integers(0, 3, 4)] = 1.0
    assert math.isclose(
        loss_unseen(scores, onehot, np.ones((4, 3))),
        loss_seen(scores, onehot),
        rel_tol=1e-12,
    )


def test_zero_masks_with_zero_indicators_vanish():
    rng = np.random.default_rng(9)
    scores = rng.uniform(0.01, 0.99, size=(4, 3))
    val = loss_unseen(scores, np.zeros((4, 3)), np.zeros((4, 3)))
    # each of the 12 terms is -log(1 - eps), i.e. the clamping epsilon
    assert val == pytest.approx(0.0, abs=scores.size * SCORE_EPS * 1.5)


def test_loss_unseen_matches_loop_oracle():
    rng = np.random.default_rng(10)
    scores = rng.uniform(0.01, 0.99, size=(5, 4))
    masks = rng.uniform(0, 1, size=(5, 4))
    onehot = np.zeros((5, 4))
    onehot[np.arange(5), rng.integers(0, 4, 5)] = 1.0
    assert math.isclose(
        loss_unseen(scores, onehot, masks),
        masked_bce_sum_loop(scores, onehot, masks, SCORE_EPS),
        rel_tol=1e-12,
    )


def test_loss_unseen_rejects_invalid_masks():
    with pytest.raises(DataError, match="masks"):
        loss_unseen(np.full((1, 2), 0.5), np.zeros((1, 2)), np.array([[0.5, 1.5]]))


def test_total_loss_is_affine():
    assert total_loss(3.0, 7.0, 0.0) == 3.0
    assert total_loss(3.0, 7.0, 0.2) == pytest.approx(3.0 + 0.2 * 7.0, rel=1e-15)


def test_default_unseen_weight():
    assert TrainConfig().beta == 0.2


def test_split_loss_decomposes_into_joint_loss():
    rng = np.random.default_rng(11)
    for _ in range(20):
        num_seen, num_unseen, batch = 3, 2, 4
        scores = rng.uniform(0.01, 0.99, size=(batch, num_seen + num_unseen))
        onehot = np.zeros_like(scores)
        onehot[np.arange(batch), rng.integers(0, num_seen + num_unseen, batch)] = 1.0
        split = total_loss(
            loss_seen(scores[:, :num_seen], onehot[:, :num_seen]),
            loss_unseen(scores[:, num_seen:], onehot[:, num_seen:], np.ones((batch, num_unseen))),
            beta=1.0,
        )
        joint = bce_sum_loop(scores, onehot)
        assert abs(split - joint) < 1e-10


@settings(max_examples=100, deadline=None)
@given(
    c=st.floats(0.01, 0.99),
    s1=st.floats(0.0, 1.0),
    s2=st.floats(0.0, 1.0),
)
def test_negative_term_is_monotone_in_mask(c, s1, s2):
    lo, hi = sorted((s1, s2))
    term = lambda s: loss_unseen(np.array([[c]]), np.zeros((1, 1)), np.array([[s]]))
    assert term(hi) >= term(lo) - 1e-12


# ---------------------------------------------------------------------------
# training


def tiny_training(tiny_world):
    dataset, attrs, _ = tiny_world
    protos = generate_prototype_set(attrs, compute_seen_means(dataset), 2, 1.0, 1.02, seed=0)
    return augment_training_set(dataset, protos), attrs


def test_zero_learning_rate_keeps_weights_bit_exact(tiny_world, tiny_model, tiny_sim):
    training, attrs = tiny_training(tiny_world)
    cfg = TrainConfig(learning_rate=0.0, epochs=1, batch_size=4, seed=2)
    trained, history = train(tiny_model, training, attrs, tiny_sim, cfg)
    for name in PARAM_NAMES:
        assert np.array_equal(trained.params[name], tiny_model.params[name])
    assert len(history) == 1


def test_training_is_deterministic(tiny_world, tiny_model, tiny_sim):
    training, attrs = tiny_training(tiny_world)
    cfg = TrainConfig(epochs=3, batch_size=4, seed=2)
    t1, h1 = train(tiny_model, training, attrs, tiny_sim, cfg)
    t2, h2 = train(tiny_model, training, attrs, tiny_sim, cfg)
    assert h1 == h2
    for name in PARAM_NAMES:
        assert np.array_equal(t1.params[name], t2.params[name])


def test_training_reduces_loss(tiny_world, tiny_model, tiny_sim):
    training, attrs = tiny_training(tiny_world)
    cfg = TrainConfig(epochs=30, batch_size=8, seed=2)
    _, history = train(tiny_model, training, attrs, tiny_sim, cfg)
    assert history[-1] < history[0]


def test_plain_loss_mode_runs_without_masks(tiny_world, tiny_model):
    training, attrs = tiny_training(tiny_world)
    cfg = TrainConfig(epochs=2, batch_size=4, seed=2, plain_loss_mode=True)
    _, history = train(tiny_model, training, attrs, None, cfg)
    assert len(history) == 2
    assert all(math.isfinite(h) for h in history)


def test_divergence_raises_numerical_error(tiny_world, tiny_model, tiny_sim):
    training, attrs = tiny_training(tiny_world)
    cfg = TrainConfig(learning_rate=1e200, epochs=50, batch_size=4, seed=2)
    with pytest.raises(NumericalError, match="diverged"):
        train(tiny_model, training, attrs, tiny_sim, cfg)


def test_dpsr_requires_similarity_matrix(tiny_world, tiny_model):
    training, attrs = tiny_training(tiny_world)
    with pytest.raises(ConfigError, match="similarity"):
        train(tiny_model, training, attrs, None, TrainConfig(epochs=1))


def test_input_model_is_not_mutated(tiny_world, tiny_model, tiny_sim):
    training, attrs = tiny_training(tiny_world)
    before = {k: v.copy() for k, v in tiny_model.params.items()}
    train(tiny_model, training, attrs, tiny_sim, TrainConfig(epochs=1, seed=0))
    for name in PARAM_NAMES:
        assert np.array_equal(tiny_model.params[name], before[name])


def test_emitted_scores_stay_clamped(tiny_world, tiny_model, tiny_sim):
    training, attrs = tiny_training(tiny_world)
    trained, _ = train(
        tiny_model, training, attrs, tiny_sim, TrainConfig(epochs=20, batch_size=8, seed=0)
    )
    embeds = encode_semantics(trained, attrs)
    scores = compatibility_scores(trained, training.features, embeds)
    assert scores.min() >= SCORE_EPS
    assert scores.max() <= 1 - SCORE_EPS


def test_invalid_train_config():
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(beta=-0.1)


# ---------------------------------------------------------------------------
# gradient verification


def test_gradient_check_zero_init(tiny_world, tiny_sim, tiny_batch):
    _, attrs, _ = tiny_world
    feats, labels = tiny_batch
    model = zero_model(attr_dim=attrs.attr_dim)
    err = gradient_check(model, feats, labels, attrs, tiny_sim, beta=0.2)
    assert err < 1e-4


def test_gradient_check_seeded_models(tiny_world, tiny_sim, tiny_batch):
    _, attrs, _ = tiny_world
    feats, labels = tiny_batch
    for seed in range(3):
        model = init_classifier(attrs.attr_dim, 6, 8, 8, seed=seed)
        err = gradient_check(model, feats, labels, attrs, tiny_sim, beta=0.2)
        assert err < 1e-4, f"seed {seed}: {err}"


def test_gradient_check_plain_mode(tiny_world, tiny_batch):
    _, attrs, _ = tiny_world
    feats, labels = tiny_batch
    model = init_classifier(attrs.attr_dim, 6, 8, 8, seed=7)
    err = gradient_check(model, feats, labels, attrs, None, plain_loss_mode=True)
    assert err < 1e-4


def test_beta_zero_ignores_the_masked_branch(tiny_world, tiny_sim, tiny_batch):
    _, attrs, _ = tiny_world
    feats, labels = tiny_batch
    model = init_classifier(attrs.attr_dim, 6, 8, 8, seed=7)
    err = gradient_check(model, feats, labels, attrs, tiny_sim, beta=0.0)
    assert err < 1e-4
    from zslproto.classifier import _batch_loss_and_grads, _onehot

    onehot = _onehot(labels, attrs.num_classes)
    ones = np.ones((labels.shape[0], attrs.num_unseen))
    halves = 0.5 * ones
    loss_a, grads_a = _batch_loss_and_grads(
        model.params, feats, attrs.values, onehot, ones, attrs.num_seen, 0.0, False
    )
    loss_b, grads_b = _batch_loss_and_grads(
        model.params, feats, attrs.values, onehot, halves, attrs.num_seen, 0.0, False
    )
    assert loss_a == loss_b
    for name in PARAM_NAMES:
        assert np.array_equal(grads_a[name], grads_b[name])


# ---------------------------------------------------------------------------
# persistence


def test_model_round_trip(tmp_path, tiny_model):
    save_model(tiny_model, tmp_path, extra={"num_seen": 3, "num_unseen": 2, "seed": 1})
    back, extra = load_model(tmp_path)
    assert extra["num_seen"] == 3
    for name in PARAM_NAMES:
        assert np.array_equal(back.params[name], tiny_model.params[name])
    assert (back.attr_dim, back.feature_dim) == (tiny_model.attr_dim, tiny_model.feature_dim)


def test_load_model_missing_manifest(tmp_path):
    with pytest.raises(DataError, match="manifest"):
        load_model(tmp_path)
