"""Semantic-aware contrastive classifier.

A two-layer encoder maps attribute vectors into the visual feature space
(ReLU then LeakyReLU); fusing an instance feature with a class embedding by
elementwise product and passing it through a two-layer scorer (ReLU hidden,
sigmoid output) yields a compatibility score in (0, 1) for every
(instance, class) pair.

Training minimizes a split binary cross-entropy: a plain sum over seen
columns plus, weighted by beta, a sum over unseen columns whose
probabilities are modulated by semantic similarity masks. Everything is
float64 and hand-rolled so the analytic gradients can be checked against
central finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datatypes import AttributeMatrix, TrainingSet
from .errors import ConfigError, DataError, NumericalError
from .rng import substream
from .similarity import SimilarityMatrix
from .bundle import read_matrix, write_matrix

SCORE_EPS = 1e-7
LEAKY_SLOPE = 0.01

PARAM_NAMES = ("enc_w1", "enc_b1", "enc_w2", "enc_b2", "sco_w1", "sco_b1", "sco_w2", "sco_b2")

MODEL_MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class ContrastiveClassifier:
    """Parameter container; treat instances as immutable."""

    attr_dim: int
    feature_dim: int
    encoder_hidden: int
    scorer_hidden: int
    params: dict[str, np.ndarray]

    def __post_init__(self):
        shapes = _param_shapes(
            self.attr_dim, self.feature_dim, self.encoder_hidden, self.scorer_hidden
        )
        for name in PARAM_NAMES:
            if name not in self.params:
                raise DataError(f"missing parameter '{name}'")
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shapes[name]:
                raise DataError(
                    f"parameter '{name}' has shape {arr.shape}, expected {shapes[name]}"
                )
            self.params[name] = arr

    def copy_params(self) -> dict[str, np.ndarray]:
        return {name: self.params[name].copy() for name in PARAM_NAMES}


def _param_shapes(attr_dim, feature_dim, encoder_hidden, scorer_hidden):
    return {
        "enc_w1": (encoder_hidden, attr_dim),
        "enc_b1": (encoder_hidden,),
        "enc_w2": (feature_dim, encoder_hidden),
        "enc_b2": (feature_dim,),
        "sco_w1": (scorer_hidden, feature_dim),
        "sco_b1": (scorer_hidden,),
        "sco_w2": (scorer_hidden,),
        "sco_b2": (),
    }


def init_classifier(
    attr_dim: int,
    feature_dim: int,
    encoder_hidden: int = 1024,
    scorer_hidden: int = 1024,
    seed: int = 0,
    zero_init: bool = False,
) -> ContrastiveClassifier:
    """Seeded init: weights and biases uniform in +-1/sqrt(fan_in).

    Draws come from the "init" substream of ``seed``. Biases share their
    layer's fan-in bound; drawing them too keeps pre-activations off the
    exact ReLU kinks even when an input deactivates a whole layer.
    """
    if min(attr_dim, feature_dim, encoder_hidden, scorer_hidden) < 1:
        raise ConfigError("all model dimensions must be >= 1")
    shapes = _param_shapes(attr_dim, feature_dim, encoder_hidden, scorer_hidden)
    fan_in = {
        "enc_w1": attr_dim,
        "enc_b1": attr_dim,
        "enc_w2": encoder_hidden,
        "enc_b2": encoder_hidden,
        "sco_w1": feature_dim,
        "sco_b1": feature_dim,
        "sco_w2": scorer_hidden,
        "sco_b2": scorer_hidden,
    }
    rng = substream(seed, "init")
    params: dict[str, np.ndarray] = {}
    for name in PARAM_NAMES:
        if zero_init:
            params[name] = np.zeros(shapes[name])
        else:
            bound = 1.0 / math.sqrt(fan_in[name])
            params[name] = rng.uniform(-bound, bound, size=shapes[name])
    return ContrastiveClassifier(
        attr_dim=attr_dim,
        feature_dim=feature_dim,
        encoder_hidden=encoder_hidden,
        scorer_hidden=scorer_hidden,
        params=params,
    )


# ---------------------------------------------------------------------------
# forward


def _encoder_forward(params, attr_rows):
    # divergence surfaces as a non-finite loss, checked by the caller; the
    # numpy warnings en route to it are redundant noise
    with np.errstate(over="ignore", invalid="ignore"):
        pre1 = attr_rows @ params["enc_w1"].T + params["enc_b1"]
        h1 = np.maximum(pre1, 0.0)
        pre2 = h1 @ params["enc_w2"].T + params["enc_b2"]
        embeds = np.where(pre2 > 0, pre2, LEAKY_SLOPE * pre2)
    return embeds, (attr_rows, pre1, h1, pre2)


def _scorer_forward(params, features, embeds):
    batch, dim = features.shape
    classes = embeds.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        fused = features[:, None, :] * embeds[None, :, :]
        flat = fused.reshape(batch * classes, dim)
        pre3 = flat @ params["sco_w1"].T + params["sco_b1"]
        hidden = np.maximum(pre3, 0.0)
        logits = (hidden @ params["sco_w2"] + params["sco_b2"]).reshape(batch, classes)
        raw = 1.0 / (1.0 + np.exp(-logits))
    scores = np.clip(raw, SCORE_EPS, 1.0 - SCORE_EPS)
    return scores, (features, fused, pre3, hidden, raw)


def encode_semantics(model: ContrastiveClassifier, attrs) -> np.ndarray:
    """Embed every class's attribute row into the feature space."""
    rows = attrs.values if isinstance(attrs, AttributeMatrix) else np.asarray(attrs, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.shape[1] != model.attr_dim:
        raise DataError(f"attribute rows have {rows.shape[1]} columns, model expects {model.attr_dim}")
    embeds, _ = _encoder_forward(model.params, rows)
    return embeds


def fuse(feature: np.ndarray, class_embed: np.ndarray) -> np.ndarray:
    """Elementwise product of an instance feature and a class embedding."""
    feature = np.asarray(feature, dtype=np.float64)
    class_embed = np.asarray(class_embed, dtype=np.float64)
    if feature.shape != class_embed.shape:
        raise DataError(f"fusion length mismatch: {feature.shape} vs {class_embed.shape}")
    return feature * class_embed


def score(model: ContrastiveClassifier, fused: np.ndarray) -> float:
    """Compatibility score of one fused vector, clamped into (0, 1)."""
    fused = np.asarray(fused, dtype=np.float64).ravel()
    if fused.shape[0] != model.feature_dim:
        raise DataError(f"fused vector has length {fused.shape[0]}, model expects {model.feature_dim}")
    hidden = np.maximum(model.params["sco_w1"] @ fused + model.params["sco_b1"], 0.0)
    logit = hidden @ model.params["sco_w2"] + model.params["sco_b2"]
    with np.errstate(over="ignore"):
        raw = 1.0 / (1.0 + np.exp(-logit))
    return float(np.clip(raw, SCORE_EPS, 1.0 - SCORE_EPS))


def compatibility_scores(
    model: ContrastiveClassifier, features: np.ndarray, embeds: np.ndarray
) -> np.ndarray:
    """Score every (instance, class) pair; rows are instances."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1] != model.feature_dim or embeds.shape[1] != model.feature_dim:
        raise DataError("feature/embedding dimension does not match the model")
    scores, _ = _scorer_forward(model.params, features, embeds)
    return scores


# ---------------------------------------------------------------------------
# losses (pure sums; the training loop rescales per batch)


def loss_seen(scores: np.ndarray, onehot: np.ndarray) -> float:
    """Summed BCE over the seen columns."""
    scores = np.asarray(scores, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    if scores.shape != onehot.shape:
        raise DataError(f"score/indicator shape mismatch: {scores.shape} vs {onehot.shape}")
    if scores.size and (scores.min() <= 0 or scores.max() >= 1):
        raise DataError("scores must lie strictly inside (0, 1)")
    return float(-np.sum(onehot * np.log(scores) + (1 - onehot) * np.log(1 - scores)))


def loss_unseen(scores: np.ndarray, onehot: np.ndarray, sim_rows: np.ndarray) -> float:
    """Summed BCE over the unseen columns with similarity-masked scores.

    ``sim_rows[i]`` is the similarity row of sample i's ground-truth class
    restricted to the unseen columns. Products are clamped away from 0 and
    1 before the logarithms.
    """
    scores = np.asarray(scores, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    sim_rows = np.asarray(sim_rows, dtype=np.float64)
    if scores.shape != onehot.shape or scores.shape != sim_rows.shape:
        raise DataError(
            f"score/indicator/mask shape mismatch: {scores.shape}, {onehot.shape}, {sim_rows.shape}"
        )
    if sim_rows.size and (sim_rows.min() < 0 or sim_rows.max() > 1):
        raise DataError("similarity masks must lie in [0, 1]")
    if scores.size and (scores.min() <= 0 or scores.max() >= 1):
        raise DataError("scores must lie strictly inside (0, 1)")
    masked = np.clip(scores * sim_rows, SCORE_EPS, 1.0 - SCORE_EPS)
    return float(-np.sum(onehot * np.log(masked) + (1 - onehot) * np.log(1 - masked)))


def total_loss(seen_part: float, unseen_part: float, beta: float) -> float:
    """Combined objective: seen part plus beta times the unseen part."""
    return float(seen_part + beta * unseen_part)


def joint_loss(scores: np.ndarray, onehot: np.ndarray) -> float:
    """Plain summed BCE over all columns (the unsplit baseline objective)."""
    return loss_seen(scores, onehot)


# ---------------------------------------------------------------------------
# backward


def _score_grad_split(scores, onehot, sim_rows, num_seen, beta):
    """d(total loss)/d(score) for the split objective, sum form."""
    grad = np.empty_like(scores)
    c_s, m_s = scores[:, :num_seen], onehot[:, :num_seen]
    grad[:, :num_seen] = -m_s / c_s + (1 - m_s) / (1 - c_s)
    c_u, m_u = scores[:, num_seen:], onehot[:, num_seen:]
    raw = c_u * sim_rows
    masked = np.clip(raw, SCORE_EPS, 1.0 - SCORE_EPS)
    inner = -m_u / masked + (1 - m_u) / (1 - masked)
    active = (raw > SCORE_EPS) & (raw < 1.0 - SCORE_EPS)
    grad[:, num_seen:] = beta * inner * sim_rows * active
    return grad


def _score_grad_joint(scores, onehot):
    return -onehot / scores + (1 - onehot) / (1 - scores)


def _backward(params, enc_cache, sco_cache, dscores):
    """Backprop d(loss)/d(score) to every parameter; returns a grad dict."""
    attr_rows, pre1, h1, pre2 = enc_cache
    features, fused, pre3, hidden, raw = sco_cache
    batch, classes = dscores.shape
    dim = features.shape[1]

    # Through the sigmoid; clamped scores sit on a plateau with zero slope.
    active = (raw > SCORE_EPS) & (raw < 1.0 - SCORE_EPS)
    dlogits = (dscores * raw * (1 - raw) * active).reshape(batch * classes)

    grads = {}
    grads["sco_w2"] = hidden.T @ dlogits
    grads["sco_b2"] = np.asarray(dlogits.sum())
    dhidden = np.outer(dlogits, params["sco_w2"])
    dpre3 = dhidden * (pre3 > 0)
    flat = fused.reshape(batch * classes, dim)
    grads["sco_w1"] = dpre3.T @ flat
    grads["sco_b1"] = dpre3.sum(axis=0)

    dfused = (dpre3 @ params["sco_w1"]).reshape(batch, classes, dim)
    dembeds = (dfused * features[:, None, :]).sum(axis=0)

    dpre2 = dembeds * np.where(pre2 > 0, 1.0, LEAKY_SLOPE)
    grads["enc_w2"] = dpre2.T @ h1
    grads["enc_b2"] = dpre2.sum(axis=0)
    dh1 = dpre2 @ params["enc_w2"]
    dpre1 = dh1 * (pre1 > 0)
    grads["enc_w1"] = dpre1.T @ attr_rows
    grads["enc_b1"] = dpre1.sum(axis=0)
    return grads


def _batch_loss_and_grads(params, features, attr_rows, onehot, sim_rows, num_seen, beta, plain):
    embeds, enc_cache = _encoder_forward(params, attr_rows)
    scores, sco_cache = _scorer_forward(params, features, embeds)
    if plain:
        loss = joint_loss(scores, onehot)
    else:
        seen_part = loss_seen(scores[:, :num_seen], onehot[:, :num_seen])
        unseen_part = loss_unseen(scores[:, num_seen:], onehot[:, num_seen:], sim_rows)
        loss = total_loss(seen_part, unseen_part, beta)
    if not math.isfinite(loss):
        return loss, None  # caller reports divergence; no point backpropagating
    if plain:
        dscores = _score_grad_joint(scores, onehot)
    else:
        dscores = _score_grad_split(scores, onehot, sim_rows, num_seen, beta)
    grads = _backward(params, enc_cache, sco_cache, dscores)
    return loss, grads


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the gradient-descent training loop."""

    beta: float = 0.2
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0
    dpsr_enabled: bool = True
    plain_loss_mode: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.beta < 0 or not math.isfinite(self.beta):
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta}")
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ConfigError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")


def _onehot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def train(
    model: ContrastiveClassifier,
    training: TrainingSet,
    attrs: AttributeMatrix,
    sim: SimilarityMatrix | None,
    cfg: TrainConfig,
) -> tuple[ContrastiveClassifier, list[float]]:
    """Minibatch Adam on the split objective; returns (model, loss history).

    Every sample, real or synthetic, contributes to both loss parts through
    its column split. Batch gradients are the summed gradients divided by
    the batch size. History records the mean per-sample loss per epoch.
    Deterministic for a fixed config: shuffling comes from the "shuffle"
    substream of ``cfg.seed``.
    """
    if training.num_classes != attrs.num_classes or training.num_seen != attrs.num_seen:
        raise DataError("training set and attribute matrix disagree on class counts")
    if training.features.shape[1] != model.feature_dim:
        raise DataError("training feature dimension does not match the model")
    if cfg.dpsr_enabled and not cfg.plain_loss_mode:
        if sim is None:
            raise ConfigError("dpsr enabled but no similarity matrix supplied")
        if sim.num_seen != attrs.num_seen or sim.num_unseen != attrs.num_unseen:
            raise DataError("similarity matrix class counts do not match")

    n = len(training)
    num_seen = training.num_seen
    onehot_all = _onehot(training.labels, training.num_classes)
    if cfg.dpsr_enabled and not cfg.plain_loss_mode:
        sim_rows_all = sim.values[training.labels, num_seen:]
    else:
        sim_rows_all = np.ones((n, training.num_unseen))

    params = model.copy_params()
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    b1, b2, adam_eps = 0.9, 0.999, 1e-8
    step = 0

    shuffle_rng = substream(cfg.seed, "shuffle")
    history: list[float] = []
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, grads = _batch_loss_and_grads(
                params,
                training.features[idx],
                attrs.values,
                onehot_all[idx],
                sim_rows_all[idx],
                num_seen,
                cfg.beta,
                cfg.plain_loss_mode,
            )
            if grads is None or not math.isfinite(loss):
                raise NumericalError(
                    f"training diverged at epoch {epoch}, batch {start // cfg.batch_size}: "
                    f"loss={loss}"
                )
            epoch_loss += loss
            step += 1
            scale = 1.0 / idx.shape[0]
            for name in PARAM_NAMES:
                g = grads[name] * scale
                adam_m[name] = b1 * adam_m[name] + (1 - b1) * g
                adam_v[name] = b2 * adam_v[name] + (1 - b2) * g * g
                m_hat = adam_m[name] / (1 - b1**step)
                v_hat = adam_v[name] / (1 - b2**step)
                params[name] = params[name] - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + adam_eps)
        history.append(epoch_loss / n)

    trained = ContrastiveClassifier(
        attr_dim=model.attr_dim,
        feature_dim=model.feature_dim,
        encoder_hidden=model.encoder_hidden,
        scorer_hidden=model.scorer_hidden,
        params=params,
    )
    return trained, history


# ---------------------------------------------------------------------------
# gradient verification


def gradient_check(
    model: ContrastiveClassifier,
    features: np.ndarray,
    labels: np.ndarray,
    attrs: AttributeMatrix,
    sim: SimilarityMatrix | None = None,
    beta: float = 0.2,
    plain_loss_mode: bool = False,
    step: float = 1e-5,
) -> float:
    """Worst relative error of analytic vs central-finite-difference grads.

    Perturbs every parameter element by +-step. The relative error uses an
    absolute floor so that structurally zero gradients compare at the
    finite-difference noise floor instead of dividing zero by zero.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    onehot = _onehot(labels, attrs.num_classes)
    if sim is not None and not plain_loss_mode:
        sim_rows = sim.values[labels, attrs.num_seen :]
    else:
        sim_rows = np.ones((labels.shape[0], attrs.num_unseen))

    def batch_loss(params):
        loss, _ = _batch_loss_and_grads(
            params, features, attrs.values, onehot, sim_rows, attrs.num_seen, beta, plain_loss_mode
        )
        return loss

    params = model.copy_params()
    _, analytic = _batch_loss_and_grads(
        params, features, attrs.values, onehot, sim_rows, attrs.num_seen, beta, plain_loss_mode
    )
    if analytic is None:
        raise NumericalError("non-finite loss on the gradient-check batch")

    fd = {name: np.zeros_like(np.atleast_1d(params[name])) for name in PARAM_NAMES}
    for name in PARAM_NAMES:
        flat = np.atleast_1d(params[name]).reshape(-1)
        fd_flat = fd[name].reshape(-1)
        for i in range(flat.shape[0]):
            original = flat[i]
            flat[i] = original + step
            up = batch_loss(params)
            flat[i] = original - step
            down = batch_loss(params)
            flat[i] = original
            fd_flat[i] = (up - down) / (2 * step)

    scale = 1.0
    for name in PARAM_NAMES:
        a = np.abs(np.atleast_1d(np.asarray(analytic[name], dtype=np.float64)))
        scale = max(scale, a.max(initial=0.0), np.abs(fd[name]).max(initial=0.0))
    worst = 0.0
    for name in PARAM_NAMES:
        a = np.atleast_1d(np.asarray(analytic[name], dtype=np.float64))
        f = fd[name].reshape(a.shape)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-3 * scale)
        worst = max(worst, float((np.abs(a - f) / denom).max(initial=0.0)))
    return worst


# ---------------------------------------------------------------------------
# persistence


def save_model(model: ContrastiveClassifier, path: Path | str, extra: dict | None = None) -> None:
    """Write the model as manifest.json plus one float64 container per parameter."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "zslproto-model",
        "version": 1,
        "attr_dim": model.attr_dim,
        "feature_dim": model.feature_dim,
        "encoder_hidden": model.encoder_hidden,
        "scorer_hidden": model.scorer_hidden,
        "activations": {"encoder": ["relu", "leaky_relu"], "scorer": ["relu", "sigmoid"]},
        "leaky_slope": LEAKY_SLOPE,
        "score_eps": SCORE_EPS,
        "params": {
            name: {"file": f"{name}.zfb", "shape": list(np.shape(model.params[name]))}
            for name in PARAM_NAMES
        },
        "extra": extra or {},
    }
    (path / MODEL_MANIFEST_FILE).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name in PARAM_NAMES:
        arr = np.atleast_2d(np.asarray(model.params[name], dtype=np.float64))
        write_matrix(path / f"{name}.zfb", arr, float64=True)


def load_model(path: Path | str) -> tuple[ContrastiveClassifier, dict]:
    """Load a persisted model; returns (model, extra metadata)."""
    path = Path(path)
    manifest_path = path / MODEL_MANIFEST_FILE
    if not manifest_path.exists():
        raise DataError(f"no model manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != "zslproto-model" or manifest.get("version") != 1:
        raise DataError("unrecognized model manifest")
    params = {}
    for name in PARAM_NAMES:
        entry = manifest["params"][name]
        arr = read_matrix(path / entry["file"], expect_float64=True)
        params[name] = arr.reshape(tuple(entry["shape"]))
    model = ContrastiveClassifier(
        attr_dim=int(manifest["attr_dim"]),
        feature_dim=int(manifest["feature_dim"]),
        encoder_hidden=int(manifest["encoder_hidden"]),
        scorer_hidden=int(manifest["scorer_hidden"]),
        params=params,
    )
    return model, manifest.get("extra", {})
