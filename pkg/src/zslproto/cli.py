"""Command-line interface.

Subcommands: make-synthetic, synth, train, eval, run, sweep. Exit codes:
0 success, 2 configuration error, 3 data error, 4 numerical failure.
No environment variables are consulted; all state arrives via flags or the
config file, and flags win over the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .bundle import load_bundle, save_bundle, write_matrix
from .classifier import TrainConfig, init_classifier, load_model, save_model, train
from .errors import ConfigError, PipelineError
from .evaluate import evaluate_model, prototype_alignment
from .msas import MsasConfig, rescore_attributes
from .pipeline import load_run_config, run_pipeline, run_sweep, write_sweep_csv
from .similarity import build_similarity_matrix
from .synthesis import (
    augment_training_set,
    compute_seen_means,
    generate_prototype_set,
    load_prototypes,
    save_prototypes,
)
from .synthetic import make_synthetic_world


def _add_msas_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--wa", type=float, default=None, help="re-scoring weight")
    parser.add_argument("--th", type=float, default=None, help="re-scoring threshold")
    parser.add_argument(
        "--no-msas", action="store_true", help="skip attribute re-scoring entirely"
    )


def _resolve_msas(args) -> MsasConfig | None:
    """Explicit wa/th are required whenever re-scoring is enabled."""
    if args.no_msas:
        return None
    if args.wa is None or args.th is None:
        raise ConfigError("attribute re-scoring needs --wa and --th (or pass --no-msas)")
    return MsasConfig(weight=args.wa, threshold=args.th)


def _cmd_make_synthetic(args) -> int:
    dataset, attrs, true_means = make_synthetic_world(
        seed=args.seed,
        num_seen=args.num_seen,
        num_unseen=args.num_unseen,
        feature_dim=args.feature_dim,
        attr_dim=args.attr_dim,
        samples_per_seen_class=args.samples,
        noise_scale=args.noise,
    )
    save_bundle(dataset, attrs, args.out)
    if args.truth:
        write_matrix(args.truth, true_means, float64=True)
    print(f"wrote synthetic bundle to {args.out} "
          f"({dataset.features.shape[0]} rows, {dataset.num_seen}+{dataset.num_unseen} classes)")
    return 0


def _cmd_synth(args) -> int:
    dataset, attrs = load_bundle(args.bundle)
    msas_cfg = _resolve_msas(args)
    if msas_cfg is not None:
        attrs = rescore_attributes(attrs, msas_cfg)
    means = compute_seen_means(dataset)
    protos = generate_prototype_set(
        attrs,
        means,
        per_class=args.per_class,
        lambda_min=args.lambda_min,
        lambda_max=args.lambda_max,
        seed=args.seed,
    )
    save_prototypes(protos, args.out)
    print(f"wrote {len(protos)} prototypes ({args.per_class} per unseen class) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    dataset, attrs = load_bundle(args.bundle)
    msas_cfg = _resolve_msas(args)
    if msas_cfg is not None:
        attrs = rescore_attributes(attrs, msas_cfg)
    protos = load_prototypes(args.protos)
    training = augment_training_set(dataset, protos)

    sim = None
    dpsr_enabled = not args.no_dpsr
    if dpsr_enabled and not args.plain_loss:
        sim = build_similarity_matrix(attrs, args.phi)
        if args.dump_similarity:
            write_matrix(args.dump_similarity, sim.values, float64=True)

    cfg = TrainConfig(
        beta=args.beta,
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        dpsr_enabled=dpsr_enabled,
        plain_loss_mode=args.plain_loss,
    )
    model = init_classifier(
        attr_dim=attrs.attr_dim,
        feature_dim=dataset.feature_dim,
        encoder_hidden=args.encoder_hidden,
        scorer_hidden=args.scorer_hidden,
        seed=args.seed,
    )
    trained, history = train(model, training, attrs, sim, cfg)
    save_model(
        trained,
        args.out,
        extra={
            "num_seen": dataset.num_seen,
            "num_unseen": dataset.num_unseen,
            "seed": args.seed,
            "msas": {
                "enabled": msas_cfg is not None,
                "wa": msas_cfg.weight if msas_cfg else None,
                "th": msas_cfg.threshold if msas_cfg else None,
            },
            "dpsr": {"enabled": dpsr_enabled, "phi": args.phi},
            "beta": args.beta,
        },
    )
    print(f"trained {cfg.epochs} epochs; "
          f"loss {history[0]:.4f} -> {history[-1]:.4f}; model saved to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    dataset, attrs = load_bundle(args.bundle)
    model, extra = load_model(args.model)
    msas_meta = extra.get("msas", {})
    if msas_meta.get("enabled"):
        attrs = rescore_attributes(
            attrs, MsasConfig(weight=msas_meta["wa"], threshold=msas_meta["th"])
        )
    report = evaluate_model(model, dataset, attrs, config_echo={"model": str(args.model)})

    payload = report.to_dict()
    if args.alignment_k is not None:
        if args.protos is None:
            raise ConfigError("--alignment-k needs --protos pointing at a prototype directory")
        protos = load_prototypes(args.protos)
        k = args.alignment_k
        if k <= 0:  # auto: min(prototypes per class, 5)
            k = min(len(protos) // max(1, protos.num_unseen), 5)
        alignment = prototype_alignment(
            protos,
            dataset.split_features("test_unseen"),
            dataset.split_labels("test_unseen"),
            k=k,
            seed=int(extra.get("seed", 0)),
        )
        payload["alignment"] = {str(c): v for c, v in alignment.items()}

    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_bytes((json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    csv_path = Path(args.csv) if args.csv else report_path.with_suffix(".csv")
    header, row = report.csv_row()
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerow(row)
    print(
        f"t1_czsl={report.t1_czsl:.2f} acc_unseen={report.acc_unseen:.2f} "
        f"acc_seen={report.acc_seen:.2f} harmonic={report.harmonic:.2f}"
    )
    return 0


def _run_overrides(args) -> dict:
    overrides: dict = {
        "bundle": getattr(args, "bundle", None),
        "out": getattr(args, "out", None),
        "seed": args.seed,
        "dataset": args.dataset,
        "msas": {},
        "synthesis": {},
        "dpsr": {},
        "train": {},
        "eval": {},
    }
    if args.no_msas:
        overrides["msas"]["enabled"] = False
    if args.wa is not None:
        overrides["msas"]["wa"] = args.wa
    if args.th is not None:
        overrides["msas"]["th"] = args.th
    if args.per_class is not None:
        overrides["synthesis"]["per_class"] = args.per_class
    if args.lambda_min is not None:
        overrides["synthesis"]["lambda_min"] = args.lambda_min
    if args.lambda_max is not None:
        overrides["synthesis"]["lambda_max"] = args.lambda_max
    if args.no_dpsr:
        overrides["dpsr"]["enabled"] = False
    if args.phi is not None:
        overrides["dpsr"]["phi"] = args.phi
    if args.beta is not None:
        overrides["train"]["beta"] = args.beta
    if args.lr is not None:
        overrides["train"]["learning_rate"] = args.lr
    if args.batch is not None:
        overrides["train"]["batch_size"] = args.batch
    if args.epochs is not None:
        overrides["train"]["epochs"] = args.epochs
    if args.plain_loss:
        overrides["train"]["plain_loss"] = True
    if args.alignment_k is not None:
        overrides["eval"]["alignment_k"] = args.alignment_k
    return overrides


def _cmd_run(args) -> int:
    config = load_run_config(args.config, _run_overrides(args))
    report = run_pipeline(config)
    print(
        f"t1_czsl={report.t1_czsl:.2f} acc_unseen={report.acc_unseen:.2f} "
        f"acc_seen={report.acc_seen:.2f} harmonic={report.harmonic:.2f} "
        f"(artifacts in {config.out})"
    )
    return 0


def _cmd_sweep(args) -> int:
    config = load_run_config(args.config, _run_overrides(args))
    axis = args.axis.replace("-", "_")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError as e:
        raise ConfigError(f"could not parse sweep values '{args.values}': {e}") from e
    rows = run_sweep(config, axis, values)
    csv_path = Path(args.csv) if args.csv else config.out / "sweep.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, csv_path)
    failures = sum(1 for r in rows if r["status"] != "ok")
    print(f"swept {axis} over {len(rows)} values ({failures} failed); table in {csv_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zslproto",
        description="Zero-shot learning with ridge-coded prototypes and a contrastive classifier",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-synthetic", help="write a synthetic benchmark bundle")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--num-seen", type=int, default=8)
    p.add_argument("--num-unseen", type=int, default=4)
    p.add_argument("--feature-dim", type=int, default=32)
    p.add_argument("--attr-dim", type=int, default=16)
    p.add_argument("--samples", type=int, default=100, help="train rows per seen class")
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--out", required=True, help="bundle directory to create")
    p.add_argument("--truth", default=None, help="also write true unseen means here")
    p.set_defaults(func=_cmd_make_synthetic)

    p = sub.add_parser("synth", help="synthesize unseen-class prototypes")
    p.add_argument("--bundle", required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--lambda-min", type=float, default=1.0)
    p.add_argument("--lambda-max", type=float, default=1.02)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="prototype directory to create")
    _add_msas_flags(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train the contrastive classifier")
    p.add_argument("--bundle", required=True)
    p.add_argument("--protos", required=True, help="prototype directory from 'synth'")
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--phi", type=float, default=0.1)
    p.add_argument("--no-dpsr", action="store_true", help="drop the similarity masks")
    p.add_argument("--plain-loss", action="store_true", help="optimize the unsplit joint loss")
    p.add_argument("--dump-similarity", default=None, metavar="FILE",
                   help="also write the similarity matrix (float64 container)")
    p.add_argument("--encoder-hidden", type=int, default=1024)
    p.add_argument("--scorer-hidden", type=int, default=1024)
    p.add_argument("--out", required=True, help="model directory to create")
    _add_msas_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report", required=True, help="report JSON path")
    p.add_argument("--csv", default=None, help="CSV row path (default: report path with .csv)")
    p.add_argument("--alignment-k", type=int, default=None, help="sub-clusters per class")
    p.add_argument("--protos", default=None, help="prototype directory for the alignment study")
    p.set_defaults(func=_cmd_eval)

    for name, helptext in (
        ("run", "run the full pipeline"),
        ("sweep", "run the pipeline across a value grid"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--bundle", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dataset", default=None, help="preset: sun, awa2, or cub")
        p.add_argument("--per-class", type=int, default=None)
        p.add_argument("--lambda-min", type=float, default=None)
        p.add_argument("--lambda-max", type=float, default=None)
        p.add_argument("--phi", type=float, default=None)
        p.add_argument("--no-dpsr", action="store_true")
        p.add_argument("--beta", type=float, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--batch", type=int, default=None)
        p.add_argument("--plain-loss", action="store_true")
        p.add_argument("--alignment-k", type=int, default=None)
        _add_msas_flags(p)
        if name == "sweep":
            p.add_argument("--axis", required=True, choices=["per-class", "beta"])
            p.add_argument("--values", required=True, help="comma-separated values")
            p.add_argument("--csv", default=None, help="sweep table path (default: OUT/sweep.csv)")
            p.set_defaults(func=_cmd_sweep)
        else:
            p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
