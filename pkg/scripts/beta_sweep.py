#!/usr/bin/env python3
"""Sensitivity of the metrics to the unseen-loss weight beta.

Runs the pipeline on the synthetic world once per beta value and writes the
aggregated CSV table.
"""

import argparse
from pathlib import Path

from zslproto import RunConfig, make_synthetic_world, run_sweep, save_bundle
from zslproto.pipeline import write_sweep_csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=23)
    parser.add_argument("--noise", type=float, default=0.7)
    parser.add_argument(
        "--values", default="0.0,0.1,0.2,0.5,1.0", help="comma-separated beta values"
    )
    parser.add_argument("--out", default="runs/beta_sweep")
    args = parser.parse_args()

    root = Path(args.out)
    dataset, attrs, _ = make_synthetic_world(args.seed, 8, 4, 32, 16, 100, args.noise)
    bundle = root / "bundle"
    save_bundle(dataset, attrs, bundle)

    config = RunConfig(bundle=bundle, out=root, seed=args.seed, msas_enabled=False, per_class=5)
    values = [float(v) for v in args.values.split(",")]
    rows = run_sweep(config, "beta", values)
    csv_path = root / "sweep.csv"
    write_sweep_csv(rows, csv_path)
    for row in rows:
        print(row)
    print(f"table written to {csv_path}")


if __name__ == "__main__":
    main()
