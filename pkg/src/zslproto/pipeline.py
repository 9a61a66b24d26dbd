"""End-to-end orchestration: configuration, the full run, and sweeps.

A run executes attribute re-scoring (optional), prototype synthesis,
similarity-mask construction (optional), classifier training, and
evaluation, persisting every artifact plus a reproducibility manifest into
the output directory. Two runs with the same configuration produce
byte-identical reports and artifact checksums.

Configuration comes from a TOML file merged with programmatic or CLI
overrides; overrides win. All randomness derives from the single root seed
through the named substreams "init", "shuffle", and "lambda".
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .bundle import load_bundle
from .classifier import TrainConfig, init_classifier, save_model, train
from .errors import ConfigError, PipelineError, StageError
from .evaluate import EvalReport, evaluate_model, prototype_alignment
from .msas import MsasConfig, rescore_attributes
from .similarity import build_similarity_matrix
from .synthesis import (
    augment_training_set,
    compute_seen_means,
    generate_prototype_set,
    save_prototypes,
)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

# Published per-dataset hyperparameters for the three standard benchmarks.
DATASET_DEFAULTS = {
    "sun": {"wa": 0.005, "th": 0.7, "per_class": 15},
    "awa2": {"wa": 0.08, "th": 0.8, "per_class": 90},
    "cub": {"wa": 0.3, "th": 0.7, "per_class": 10},
}

SWEEP_AXES = ("per_class", "beta")
SWEEP_CSV_HEADER = ("value", "t1_czsl", "acc_unseen", "acc_seen", "harmonic", "status")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one pipeline run."""

    bundle: Path
    out: Path
    seed: int = 0
    dataset: str | None = None
    msas_enabled: bool = True
    msas: MsasConfig | None = None
    per_class: int = 5
    lambda_min: float = 1.0
    lambda_max: float = 1.02
    dpsr_enabled: bool = True
    phi: float = 0.1
    beta: float = 0.2
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 50
    plain_loss_mode: bool = False
    encoder_hidden: int = 1024
    scorer_hidden: int = 1024
    alignment_k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "bundle", Path(self.bundle))
        object.__setattr__(self, "out", Path(self.out))
        if self.msas_enabled and self.msas is None:
            raise ConfigError("msas is enabled but wa/th are not set (or disable msas)")
        if not (self.phi > 0):
            raise ConfigError(f"phi must be positive, got {self.phi}")
        # Remaining numeric ranges are validated by TrainConfig and the
        # synthesis stage; build TrainConfig eagerly to fail fast.
        self.train_config()

    def validate_paths(self) -> None:
        if not self.bundle.exists():
            raise ConfigError(f"bundle directory does not exist: {self.bundle}")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            beta=self.beta,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            dpsr_enabled=self.dpsr_enabled,
            plain_loss_mode=self.plain_loss_mode,
        )

    def derive(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def echo_dict(self) -> dict:
        """Resolved settings as a JSON-friendly dict (stable across runs)."""
        return {
            "bundle": str(self.bundle),
            "seed": self.seed,
            "dataset": self.dataset,
            "msas": {
                "enabled": self.msas_enabled,
                "wa": self.msas.weight if self.msas else None,
                "th": self.msas.threshold if self.msas else None,
            },
            "synthesis": {
                "per_class": self.per_class,
                "lambda_min": self.lambda_min,
                "lambda_max": self.lambda_max,
            },
            "dpsr": {"enabled": self.dpsr_enabled, "phi": self.phi},
            "train": {
                "beta": self.beta,
                "learning_rate": self.learning_rate,
                "batch_size": self.batch_size,
                "epochs": self.epochs,
                "plain_loss": self.plain_loss_mode,
                "encoder_hidden": self.encoder_hidden,
                "scorer_hidden": self.scorer_hidden,
            },
            "alignment_k": self.alignment_k,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.echo_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _merge(base: dict, update: dict) -> dict:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        elif value is not None:
            out[key] = value
    return out


_CONFIG_DEFAULTS = {
    "bundle": None,
    "out": None,
    "seed": 0,
    "dataset": None,
    "msas": {"enabled": True, "wa": None, "th": None},
    "synthesis": {"per_class": 5, "lambda_min": 1.0, "lambda_max": 1.02},
    "dpsr": {"enabled": True, "phi": 0.1},
    "train": {
        "beta": 0.2,
        "learning_rate": 1e-3,
        "batch_size": 64,
        "epochs": 50,
        "plain_loss": False,
        "encoder_hidden": 1024,
        "scorer_hidden": 1024,
    },
    "eval": {"alignment_k": None},
}


def load_run_config(config_path: Path | str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from defaults, dataset preset, file, and overrides.

    Later layers win: defaults < preset < file < overrides. ``overrides``
    uses the same nested shape as the file.
    """
    file_cfg: dict = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file does not exist: {path}")
        try:
            file_cfg = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"invalid config file {path}: {e}") from e
    overrides = overrides or {}

    dataset = overrides.get("dataset") or file_cfg.get("dataset") or None
    merged = _CONFIG_DEFAULTS
    if dataset is not None:
        key = str(dataset).lower()
        if key not in DATASET_DEFAULTS:
            raise ConfigError(
                f"unknown dataset preset '{dataset}' (known: {sorted(DATASET_DEFAULTS)})"
            )
        preset = DATASET_DEFAULTS[key]
        merged = _merge(
            merged,
            {
                "dataset": key,
                "msas": {"wa": preset["wa"], "th": preset["th"]},
                "synthesis": {"per_class": preset["per_class"]},
            },
        )
    merged = _merge(merged, file_cfg)
    merged = _merge(merged, overrides)

    for key in ("bundle", "out"):
        if merged[key] is None:
            raise ConfigError(f"'{key}' must be set (config file or flag)")

    msas_cfg = None
    if merged["msas"]["enabled"]:
        if merged["msas"]["wa"] is None or merged["msas"]["th"] is None:
            raise ConfigError("msas is enabled but wa/th are not set (or disable msas)")
        msas_cfg = MsasConfig(weight=float(merged["msas"]["wa"]), threshold=float(merged["msas"]["th"]))

    return RunConfig(
        bundle=Path(merged["bundle"]),
        out=Path(merged["out"]),
        seed=int(merged["seed"]),
        dataset=merged["dataset"],
        msas_enabled=bool(merged["msas"]["enabled"]),
        msas=msas_cfg,
        per_class=int(merged["synthesis"]["per_class"]),
        lambda_min=float(merged["synthesis"]["lambda_min"]),
        lambda_max=float(merged["synthesis"]["lambda_max"]),
        dpsr_enabled=bool(merged["dpsr"]["enabled"]),
        phi=float(merged["dpsr"]["phi"]),
        beta=float(merged["train"]["beta"]),
        learning_rate=float(merged["train"]["learning_rate"]),
        batch_size=int(merged["train"]["batch_size"]),
        epochs=int(merged["train"]["epochs"]),
        plain_loss_mode=bool(merged["train"]["plain_loss"]),
        encoder_hidden=int(merged["train"]["encoder_hidden"]),
        scorer_hidden=int(merged["train"]["scorer_hidden"]),
        alignment_k=(
            int(merged["eval"]["alignment_k"]) if merged["eval"]["alignment_k"] is not None else None
        ),
    )


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_bytes((json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def _mark_stale(out: Path, stage: str, error: Exception) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "stale.json", {"failed_stage": stage, "error": str(error)})
    except OSError:
        pass


def run_pipeline(config: RunConfig) -> EvalReport:
    """Execute the full pipeline and persist artifacts under ``config.out``.

    Any stage failure aborts with the stage name and flags the output
    directory stale.
    """
    config.validate_paths()
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    stale = out / "stale.json"
    if stale.exists():
        stale.unlink()

    current = "load"
    try:
        dataset, attrs = load_bundle(config.bundle)

        current = "msas"
        if config.msas_enabled:
            attrs = rescore_attributes(attrs, config.msas)

        current = "synth"
        means = compute_seen_means(dataset)
        protos = generate_prototype_set(
            attrs,
            means,
            per_class=config.per_class,
            lambda_min=config.lambda_min,
            lambda_max=config.lambda_max,
            seed=config.seed,
        )
        save_prototypes(protos, out / "prototypes")

        current = "dpsr"
        sim = None
        if config.dpsr_enabled and not config.plain_loss_mode:
            sim = build_similarity_matrix(attrs, config.phi)

        current = "train"
        model = init_classifier(
            attr_dim=attrs.attr_dim,
            feature_dim=dataset.feature_dim,
            encoder_hidden=config.encoder_hidden,
            scorer_hidden=config.scorer_hidden,
            seed=config.seed,
        )
        training = augment_training_set(dataset, protos)
        trained, history = train(model, training, attrs, sim, config.train_config())
        save_model(
            trained,
            out / "model",
            extra={
                "num_seen": dataset.num_seen,
                "num_unseen": dataset.num_unseen,
                "seed": config.seed,
                "msas": config.echo_dict()["msas"],
                "dpsr": config.echo_dict()["dpsr"],
                "beta": config.beta,
            },
        )
        _write_json(out / "history.json", {"epoch_mean_loss": history})

        current = "eval"
        report = evaluate_model(trained, dataset, attrs, config_echo=config.echo_dict())
        (out / "report.json").write_bytes(report.to_json_bytes())
        header, row = report.csv_row()
        with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerow(row)
        if config.alignment_k is not None:
            k = config.alignment_k
            if k <= 0:  # auto: min(prototypes per class, 5)
                k = min(config.per_class, 5)
            alignment = prototype_alignment(
                protos,
                dataset.split_features("test_unseen"),
                dataset.split_labels("test_unseen"),
                k=k,
                seed=config.seed,
            )
            _write_json(out / "alignment.json", {str(c): v for c, v in alignment.items()})
    except Exception as e:
        _mark_stale(out, current, e)
        raise StageError(current, e) from e

    artifacts = {}
    for path in sorted(out.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            artifacts[path.relative_to(out).as_posix()] = _sha256_file(path)
    _write_json(
        out / "manifest.json",
        {
            "config_hash": config.config_hash(),
            "config": config.echo_dict(),
            "seed": config.seed,
            "substreams": ["init", "shuffle", "lambda"],
            "flags": {
                "msas": config.msas_enabled,
                "dpsr": config.dpsr_enabled,
                "plain_loss": config.plain_loss_mode,
            },
            "artifacts": artifacts,
        },
    )
    return report


def run_sweep(config: RunConfig, axis: str, values: list[float]) -> list[dict]:
    """One pipeline run per value along ``axis``; failures are recorded.

    Every run shares the base seed. Returns one row dict per value in
    order, with metrics blank and an error note in ``status`` for runs that
    failed.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got '{axis}'")
    if not values:
        raise ConfigError("sweep needs at least one value")

    rows = []
    for value in values:
        if axis == "per_class":
            sub = config.derive(per_class=int(value), out=config.out / f"sweep_per_class_{int(value)}")
        else:
            sub = config.derive(beta=float(value), out=config.out / f"sweep_beta_{value}")
        row = {"value": value, "t1_czsl": "", "acc_unseen": "", "acc_seen": "", "harmonic": ""}
        try:
            report = run_pipeline(sub)
            row.update(
                t1_czsl=report.t1_czsl,
                acc_unseen=report.acc_unseen,
                acc_seen=report.acc_seen,
                harmonic=report.harmonic,
                status="ok",
            )
        except PipelineError as e:
            row["status"] = f"error: {e}"
        rows.append(row)
    return rows


def write_sweep_csv(rows: list[dict], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_CSV_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
