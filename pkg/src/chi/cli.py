"""Command-line entry point: ``chi <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 input or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .baselines import compare
from .dataset import drop_zero_observed, load_csv, prepare, write_csv
from .errors import ChiError, ContractError, DatasetError, ModelFormatError, SchemaError
from .evaluation import SplitSpec, run_seeds, write_curve_csv, write_summary, curve_svg
from .model import load_model, save_model, score
from .reduction import pca_rank
from .schema import CvSchema, load_schema, save_schema, validate_schema
from .synth import SynthSpec, generate
from .training import TrainOptions, fit

log = logging.getLogger("chi")

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2
INPUT_ERRORS = (DatasetError, SchemaError, ModelFormatError, ContractError, FileNotFoundError)


class InputError(ChiError):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("CHI_OUT_DIR") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(path: str | None, what: str) -> Path:
    if path is None:
        raise InputError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise InputError(f"{what} file not found: {p}")
    return p


def _dataset_name(path: Path) -> str:
    return path.stem


def _load_schema_or_default(args, ds) -> CvSchema:
    if args.schema:
        schema = load_schema(_require(args.schema, "schema"))
    else:
        log.warning("no --schema given; every CV defaults to dominant/monotonic with data bounds")
        schema = None
    result = validate_schema(schema, ds, strict=False)
    for f in result.findings:
        if f.level != "info" or args.schema:
            print(str(f), file=sys.stderr)
    if not result.ok:
        raise SchemaError("; ".join(str(f) for f in result.errors))
    return result.schema


def _train_options(args) -> TrainOptions:
    return TrainOptions(alpha=args.alpha, max_epochs=args.epochs, target_mse=args.target_mse,
                        objective=args.objective, seed=args.seed)


def cmd_validate(args) -> int:
    ds = load_csv(_require(args.data, "data"), args.target)
    schema = load_schema(_require(args.schema, "schema")) if args.schema else None
    result = validate_schema(schema, ds, strict=False)
    for f in result.findings:
        print(str(f), file=sys.stderr)
    counts = result.schema.counts()
    print(f"rows={ds.n_rows} cvs={ds.n_cols} " + " ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK if result.ok else EXIT_INPUT


def cmd_reduce(args) -> int:
    path = _require(args.data, "data")
    ds = drop_zero_observed(load_csv(path, args.target))
    schema = _load_schema_or_default(args, ds)
    norm, _ = prepare(ds, schema)
    report = pca_rank(norm)
    out = _out_dir(args) / f"{_dataset_name(path)}.reduction.csv"
    report.write_csv(out)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for r in report.rows:
        print(f"{r.rank:3d} {r.cv:<24} {r.score:.6f} {r.recommendation}")
    return EXIT_OK


def cmd_train(args) -> int:
    path = _require(args.data, "data")
    ds = drop_zero_observed(load_csv(path, args.target))
    schema = _load_schema_or_default(args, ds)
    model, trace = fit(ds, schema, _train_options(args))
    out = _out_dir(args)
    name = _dataset_name(path)
    save_model(model, out / f"{name}.model.json")
    trace.write_csv(out / f"{name}.trace.csv")
    for c in model.curves:
        write_curve_csv([c], out / f"{name}_{c.cv}.curve.csv", model.eps_h)
        if args.svg:
            (out / f"{name}_{c.cv}.curve.svg").write_text(curve_svg(c, model.eps_h), encoding="utf-8")
    print(f"epochs={len(trace)} mse={model.meta['final_mse']:.6f} model={out / f'{name}.model.json'}")
    return EXIT_OK


def _parse_sets(items: Sequence[str]) -> dict[str, float]:
    row = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--set expects name=value, got {item!r}")
        try:
            row[name.strip()] = float(value)
        except ValueError:
            raise InputError(f"--set {name}: not a number: {value!r}") from None
    return row


def cmd_score(args) -> int:
    model = load_model(_require(args.model, "model"))
    if args.set:
        scores = score(_parse_sets(args.set), model)
    else:
        path = _require(args.data, "data")
        ds = load_csv(path, args.target or model.norm_stats.observed.name
                      if model.norm_stats.observed else args.target, require_target=False)
        scores = score(ds, model)
    lines = ["row,H," + ",".join(scores.cvs)]
    for i in range(len(scores.H)):
        lines.append(f"{i},{scores.H[i]:.6f}," + ",".join(f"{v:.6f}" for v in scores.breakdown[i]))
    text = "\n".join(lines) + "\n"
    if args.out:
        path = _out_dir(args) / "scores.csv"
        path.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    path = _require(args.data, "data")
    ds = drop_zero_observed(load_csv(path, args.target))
    schema = _load_schema_or_default(args, ds)
    seeds = [args.seed + i for i in range(args.seeds)]
    out = _out_dir(args)
    name = _dataset_name(path)
    runs, summary = run_seeds(ds, schema, _train_options(args), args.ratio, seeds,
                              out_dir=out, name=name, svg=args.svg)
    summary_path = out / f"{name}_{args.ratio:g}.summary.csv"
    write_summary(summary, summary_path)
    for s, r in zip(seeds, runs):
        print(f"seed={s} mse={r.report.mse:.6f} variance={r.report.variance:.6f}")
        log.info("seed %d took %.1f ms", s, r.report.runtime_ms)
    print(f"median mse={summary['median_mse']:.6f} variance={summary['median_variance']:.6f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    path = _require(args.data, "data")
    ds = drop_zero_observed(load_csv(path, args.target))
    schema = _load_schema_or_default(args, ds)
    report = compare(ds, schema, _train_options(args), SplitSpec(args.ratio, args.seed))
    out = _out_dir(args) / f"{_dataset_name(path)}.compare.csv"
    report.write_csv(out)
    sys.stdout.write(out.read_text(encoding="utf-8"))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(args.cvs, args.rows, args.noise, args.seed, dead_cvs=args.dead)
    ds, truth = generate(spec)
    out = _out_dir(args)
    name = args.name
    write_csv(ds, out / f"{name}.csv")
    save_model(truth, out / f"{name}.truth.model.json")
    save_schema(truth.schema, out / f"{name}.schema.json")
    print(f"wrote {out / f'{name}.csv'} ({ds.n_rows} rows, {ds.n_cols} CVs)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data")
    common.add_argument("--schema")
    common.add_argument("--model")
    common.add_argument("--out", help="output directory (default: $CHI_OUT_DIR or .)")
    common.add_argument("--target", help="observed-metric column (default: last column)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--epochs", type=int, default=500)
    training.add_argument("--alpha", type=float, default=0.5)
    training.add_argument("--objective", choices=("plain", "log"), default="plain")
    training.add_argument("--target-mse", type=float, default=None)
    training.add_argument("--svg", action="store_true", help="also write an SVG chart per curve")

    split = argparse.ArgumentParser(add_help=False)
    split.add_argument("--ratio", type=float, default=0.8)

    parser = argparse.ArgumentParser(prog="chi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"chi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a dataset against a schema").set_defaults(func=cmd_validate)
    sub.add_parser("reduce", parents=[common], help="advisory PCA ranking of CVs").set_defaults(func=cmd_reduce)
    sub.add_parser("train", parents=[common, training], help="fit a model on a whole dataset").set_defaults(func=cmd_train)
    p = sub.add_parser("score", parents=[common], help="score configurations with a model")
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE")
    p.set_defaults(func=cmd_score)
    p = sub.add_parser("eval", parents=[common, training, split], help="train/test evaluation over seeds")
    p.add_argument("--seeds", type=int, default=5)
    p.set_defaults(func=cmd_eval)
    sub.add_parser("compare", parents=[common, training, split],
                   help="CHI vs OLS vs hinge on one split").set_defaults(func=cmd_compare)
    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--cvs", type=int, default=6)
    p.add_argument("--rows", type=int, default=200)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--dead", type=int, default=0, help="extra CVs with no effect")
    p.add_argument("--name", default="synth")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ChiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
