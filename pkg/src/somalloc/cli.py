"""Command line interface: one subcommand per pipeline stage plus ``run``.

Stages hand data off through files (CSV/JSON), so any stage can be run and
tested in isolation.  Exit code 0 on success; failures print a
stage-tagged message and return a nonzero code.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import allocation, logit, profiles, som, varselect
from .dataset import (
    Schema,
    load_categorical,
    load_continuous,
    load_dataset,
    load_labels,
    save_dataset,
    save_labels,
)
from .pipeline import PipelineConfig, StageError, run_pipeline, _save_allocations
from .synth import GeneratorSpec, generate


def _cmd_synth(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    spec = GeneratorSpec.survey_shaped(
        seed=args.seed,
        n=args.n,
        clusters=args.clusters,
        dependence=args.dependence,
        missing_rate=args.missing_rate,
        noise_scale=args.noise,
    )
    dataset, labels = generate(spec)
    dataset.schema.save(outdir / "schema.json")
    save_dataset(dataset, outdir / "continuous.csv", outdir / "categorical.csv")
    save_labels(labels, outdir / "true_labels.csv")
    print(f"wrote {dataset.n_rows} rows to {outdir}")
    return 0


def _cmd_select_vars(args) -> int:
    schema = Schema.load(args.schema)
    dataset = load_dataset(args.continuous, args.categorical, schema)
    report = varselect.select_variables(dataset, args.threshold)
    report.save_csv(args.out)
    kept = len(report.selected_indices)
    print(f"selected {kept}/{len(report.variables)} variables (R2 >= {args.threshold})")
    return 0


def _cmd_train(args) -> int:
    schema = Schema.load(args.schema)
    table = load_continuous(args.continuous, schema)
    cfg = som.SomConfig(units=args.units, epochs=args.epochs, seed=args.seed)
    level1 = som.train_som(table, cfg, dimensions=schema.continuous_names)
    if args.macro_units is not None:
        clustering = som.reduce_codebook(level1, args.macro_units, cfg)
        note = f"{args.units} units -> {args.macro_units} macro clusters"
        if not clustering.contiguous:
            print("warning: macro clusters are not contiguous along the string",
                  file=sys.stderr)
    else:
        clustering = level1
        note = f"{args.units} units"
    som.save_clustering(clustering, args.out)
    qe = som.quantization_error(level1, table)
    print(f"trained {note}; quantization error {qe:.6g}")
    return 0


def _cmd_describe(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    schema = Schema.load(args.schema)
    dataset = load_dataset(args.continuous, args.categorical, schema)
    clustering = som.load_clustering(args.clustering)
    labels = som.cluster_labels(clustering, dataset.continuous)
    profs = profiles.describe_clusters(dataset, labels, clustering.n_clusters)
    profiles.save_continuous_stats_csv(profs, schema, outdir / "cluster_stats.csv")
    profiles.save_modality_csv(profs, schema, outdir / "cluster_modalities.csv")
    (outdir / "cluster_profiles.svg").write_text(
        profiles.mean_profile_svg(profs, schema), encoding="utf-8"
    )
    print(f"described {clustering.n_clusters} clusters in {outdir}")
    return 0


def _cmd_fit(args) -> int:
    schema = Schema.load(args.schema)
    table = load_categorical(args.categorical, schema)
    labels = load_labels(args.labels)
    spec = logit.EncodingSpec.from_schema(schema)
    model = logit.fit_logit(
        table,
        labels,
        args.classes,
        spec,
        tol=args.tol,
        max_iter=args.max_iter,
        ridge=args.ridge,
    )
    logit.save_model(model, args.out)
    d = model.diagnostics
    print(
        f"fit {args.classes} classes: ll={d.log_likelihood:.4f} "
        f"|grad|={d.gradient_max:.3g} iters={d.iterations} ridge={d.ridge:g} "
        f"converged={d.converged}"
    )
    return 0


def _cmd_allocate(args) -> int:
    schema = Schema.load(args.schema)
    model = logit.load_model(args.model)
    table = load_categorical(args.categorical, schema, allow_missing=True)
    result = allocation.allocate(model, table, mode=args.mode, seed=args.seed)
    _save_allocations(result, args.out)
    print(f"allocated {result.n_rows} individuals ({args.mode}) to {args.out}")
    return 0


def _read_label_column(path) -> np.ndarray:
    """Accept either a plain label CSV or an allocations CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if len(header) == 1:
        return load_labels(path)
    if "assigned" in header:
        col = header.index("assigned")
        return np.array([int(r[col]) for r in rows[1:]], dtype=np.int64)
    raise ValueError(f"{path}: expected a label column or an allocations file")


def _cmd_evaluate(args) -> int:
    allocated = _read_label_column(args.allocated)
    truth = _read_label_column(args.truth)
    table = allocation.build_contingency(allocated, truth, args.classes)
    table.save_csv(args.out_table)
    summary = allocation.evaluate(table)
    with open(args.out_metrics, "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"exact {summary.exact}/{summary.total} ({summary.exact_rate:.2%}), "
        f"correct {summary.correct}/{summary.total} ({summary.correct_rate:.2%})"
    )
    return 0


def _cmd_run(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    report = run_pipeline(cfg)
    ev = report["evaluation"]
    print(
        f"pipeline done: {report['n_clusters']} clusters, "
        f"exact_rate={ev['exact_rate']:.4f}, correct_rate={ev['correct_rate']:.4f} "
        f"(report in {cfg.outdir})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somalloc",
        description=(
            "Cluster consumers from continuous shares with 1-d self-organizing "
            "maps, then allocate new individuals from categorical data alone."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic survey-shaped dataset")
    p.add_argument("--outdir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=8809)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--dependence", type=float, default=0.8)
    p.add_argument("--missing-rate", type=float, default=0.02)
    p.add_argument("--noise", type=float, default=1.5)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("select-vars", help="screen continuous variables by ANOVA R2")
    p.add_argument("--continuous", required=True)
    p.add_argument("--categorical", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--threshold", type=float, default=0.08)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select_vars)

    p = sub.add_parser("train", help="train the 1-d map (optionally reduced to macro clusters)")
    p.add_argument("--continuous", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--units", type=int, required=True)
    p.add_argument("--macro-units", type=int, default=None,
                   help="reduce to this many macro clusters via a second map")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("describe", help="cluster statistics, test values and profile chart")
    p.add_argument("--continuous", required=True)
    p.add_argument("--categorical", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--clustering", required=True)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=_cmd_describe)

    p = sub.add_parser("fit", help="fit the categorical-only membership model")
    p.add_argument("--categorical", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("allocate", help="allocate new individuals (missing cells allowed)")
    p.add_argument("--model", required=True)
    p.add_argument("--categorical", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--mode", choices=["argmax", "sample"], default="argmax")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("evaluate", help="contingency table and exact/correct rates")
    p.add_argument("--allocated", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--out-table", required=True)
    p.add_argument("--out-metrics", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", help="run the full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error [{args.command}] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
