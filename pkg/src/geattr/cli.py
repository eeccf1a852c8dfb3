"""Command-line entry point.

Exit codes: 0 ok, 1 internal error, 2 validation failure, 3 infeasible configuration.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .baseline import KmerIndex, build_kmer_index, nb_from_index, predict_kmer, predict_nb
from .calibration import calibration_table
from .data import (
    DataError,
    LabelMap,
    LineageGraph,
    load_fasta,
    load_labels,
    load_lineage,
    load_predictions,
    validate,
    write_fasta,
    write_labels,
    write_predictions,
)
from .ensemble import AlignmentError, EnsembleSpec, ensemble
from .prep import (
    DEFAULT_FRACTIONS,
    InfeasibleSplitError,
    encode_metadata,
    lineage_components,
    load_metadata,
    obfuscate_ids,
    pool_small_labs,
    split_dataset,
    write_obfuscation_map,
)
from .ranks import DEFAULT_THRESHOLDS, accuracy_curve, rank_matrix, x_metric
from .report import (
    LEADERBOARD_COLUMNS,
    MetricReport,
    build_report,
    file_digest,
    leaderboard,
    write_plotdata,
    write_rows,
)

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("geattr")


class UsageError(Exception):
    pass


def read_config(path: str | Path) -> dict[str, str]:
    """``key=value`` lines; ``#`` starts a comment. Keys use option names."""
    config = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            config[key.lstrip("-").replace("-", "_")] = value
    return config


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="seed for randomized commands")
    parser.add_argument("--config", default=default, help="key=value file of option defaults")
    parser.add_argument(
        "--format", choices=("json", "csv"), default=default if suppress else "json", help="stdout format"
    )
    parser.add_argument("-v", "--verbose", action="store_true", default=default if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geattr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a prediction file against labels")
    p.add_argument("predictions")
    p.add_argument("labels")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", parents=[common], help="full metric report for one predictor")
    p.add_argument("predictions")
    p.add_argument("labels")
    p.add_argument("--name", help="predictor name (default: file stem)")
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--target", help="category to analyse, e.g. the pooled small-lab category")
    p.add_argument("--thresholds", type=float, nargs="+", default=list(DEFAULT_THRESHOLDS))
    p.add_argument("-o", "--output", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("xmetrics", parents=[common], help="X-metrics at chosen thresholds")
    p.add_argument("predictions")
    p.add_argument("labels")
    p.add_argument("--thresholds", type=float, nargs="+", default=list(DEFAULT_THRESHOLDS))
    p.set_defaults(func=cmd_xmetrics)

    p = sub.add_parser("calibration", parents=[common], help="binned calibration table, ECE and MCE")
    p.add_argument("predictions")
    p.add_argument("labels")
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("-o", "--output", help="write the bin table CSV here")
    p.set_defaults(func=cmd_calibration)

    p = sub.add_parser("ensemble", parents=[common], help="average several prediction files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--weights", type=float, nargs="+")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("compare", parents=[common], help="leaderboard from several JSON reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("prep", parents=[common], help="pool, split and obfuscate a labelled corpus")
    p.add_argument("corpus", help="FASTA with `>sequence_id lab_id` headers")
    p.add_argument("--lineage", help="lineage edge CSV (id_a,id_b)")
    p.add_argument("--metadata", help="raw metadata CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threshold", type=int, default=10)
    p.add_argument("--fractions", type=float, nargs=3, default=list(DEFAULT_FRACTIONS))
    p.add_argument("--min-holdout", type=int, default=3)
    p.add_argument("--min-length", type=int, default=2)
    p.add_argument("--id-length", type=int, default=12)
    p.add_argument("--no-obfuscate", action="store_true", default=False)
    p.set_defaults(func=cmd_prep, randomized=True)

    p = sub.add_parser("plotdata", parents=[common], help="CSV (and optional SVG) plot series")
    p.add_argument("report")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--svg", action="store_true", default=False)
    p.set_defaults(func=cmd_plotdata)

    base = sub.add_parser("baseline", help="k-mer baselines")
    bsub = base.add_subparsers(dest="baseline_command", required=True)

    p = bsub.add_parser("build-index", parents=[common], help="index training sequences")
    p.add_argument("train", help="training FASTA")
    p.add_argument("--labels", help="labels CSV (default: lab ids from FASTA headers)")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--canonical", action="store_true", default=False)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_build_index)

    p = bsub.add_parser("predict", parents=[common], help="predict labs for query sequences")
    p.add_argument("index")
    p.add_argument("queries", help="query FASTA")
    p.add_argument("--method", choices=("kmer", "nb"), default="kmer")
    p.add_argument("--mode", choices=("stable", "unstable"), default="stable")
    p.add_argument("--k", type=int, help="must match the index")
    p.add_argument("--evalue-threshold", type=float, default=10.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--categories", help="file with one output category id per line")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_predict)
    return parser


def _emit(args, payload) -> None:
    if args.format == "csv" and isinstance(payload, dict):
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, value in payload.items():
            writer.writerow([key, json.dumps(value) if isinstance(value, (dict, list)) else value])
    else:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_checked(args):
    p = load_predictions(args.predictions)
    labels = load_labels(args.labels)
    report = validate(p, labels)
    if not report.ok:
        for line in report.findings():
            print(line, file=sys.stderr)
        return p, labels, False
    return p, labels, True


def cmd_validate(args) -> int:
    p = load_predictions(args.predictions)
    labels = load_labels(args.labels)
    report = validate(p, labels)
    _emit(args, {"ok": report.ok, "findings": report.findings()})
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_score(args) -> int:
    p, labels, ok = _load_checked(args)
    if not ok:
        return EXIT_INVALID
    provenance = {
        "predictions": {"file": Path(args.predictions).name, "sha256": file_digest(args.predictions)},
        "labels": {"file": Path(args.labels).name, "sha256": file_digest(args.labels)},
        "seed": args.seed,
    }
    report = build_report(
        p,
        labels,
        name=args.name or Path(args.predictions).stem,
        bins=args.bins,
        thresholds=args.thresholds,
        target=args.target,
        provenance=provenance,
    )
    if args.output:
        Path(args.output).write_text(report.to_json(), encoding="utf-8")
    if args.format == "csv":
        _emit(args, report.summary())
    elif not args.output:
        sys.stdout.write(report.to_json())
    return EXIT_OK


def cmd_xmetrics(args) -> int:
    p, labels, ok = _load_checked(args)
    if not ok:
        return EXIT_INVALID
    curve = accuracy_curve(rank_matrix(p), labels)
    _emit(args, {f"X{r:g}": x_metric(curve, r) for r in args.thresholds})
    return EXIT_OK


def cmd_calibration(args) -> int:
    p, labels, ok = _load_checked(args)
    if not ok:
        return EXIT_INVALID
    table = calibration_table(p, labels, args.bins)
    if args.output:
        table.to_csv(args.output)
    _emit(args, {"ece": table.ece, "mce": table.mce, "n_bins": table.n_bins})
    return EXIT_OK


def cmd_ensemble(args) -> int:
    members = [load_predictions(path) for path in args.inputs]
    for path, m in zip(args.inputs, members):
        report = validate(m)
        if not report.ok:
            for line in report.findings():
                print(f"{path}: {line}", file=sys.stderr)
            return EXIT_INVALID
    out = ensemble(EnsembleSpec(tuple(members), tuple(args.weights) if args.weights else None))
    write_predictions(out, args.output)
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = leaderboard([MetricReport.load(path) for path in args.reports])
    if args.output:
        write_rows(rows, LEADERBOARD_COLUMNS, args.output)
    if args.format == "csv":
        write_rows(rows, LEADERBOARD_COLUMNS, sys.stdout)
    else:
        sys.stdout.write(json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def cmd_prep(args) -> int:
    records = load_fasta(args.corpus)
    if args.metadata:
        meta = load_metadata(args.metadata)
        records = [dataclasses.replace(r, metadata=meta.get(r.sequence_id, {})) for r in records]
    ids = [r.sequence_id for r in records]
    graph = load_lineage(args.lineage, known_ids=ids) if args.lineage else LineageGraph(())
    pooling = pool_small_labs(records, threshold=args.threshold)
    components = lineage_components(graph, ids)
    split = split_dataset(
        records,
        pooling,
        components,
        fractions=args.fractions,
        min_holdout=args.min_holdout,
        seed=args.seed,
        min_length=args.min_length,
    )

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.no_obfuscate:
        seq_map = {s: s for s in ids}
        cat_map = {c: c for c in pooling.categories}
    else:
        seq_map = obfuscate_ids(ids, seed=args.seed, length=args.id_length)
        cat_map = obfuscate_ids(pooling.categories, seed=args.seed + 1, length=args.id_length)
        write_obfuscation_map({"sequence": seq_map, "category": cat_map}, out / "obfuscation_map.csv")
    split.to_csv(out / "splits.csv", rename=seq_map)
    pooling.to_csv(out / "pooling.csv")
    table = encode_metadata([r for r in records if r.sequence_id in split.assignment])
    table = dataclasses.replace(table, sequence_ids=tuple(seq_map[s] for s in table.sequence_ids))
    table.to_csv(out / "metadata_onehot.csv")
    by_id = {r.sequence_id: r for r in records}
    for name in ("train", "leaderboard", "holdout"):
        members = split.members(name)
        labels = LabelMap({seq_map[s]: cat_map[pooling.category_of(by_id[s])] for s in members})
        write_labels(labels, out / f"labels_{name}.csv")
        # only training sequences keep their lab in the FASTA header
        write_fasta(
            [
                dataclasses.replace(
                    by_id[s],
                    sequence_id=seq_map[s],
                    lab_id=labels[seq_map[s]] if name == "train" else None,
                    metadata={},
                )
                for s in members
            ],
            out / f"{name}.fasta",
        )
    _emit(
        args,
        {
            "n_records": len(records),
            "n_labs": len(pooling.mapping),
            "n_categories": pooling.n_categories,
            "dropped": list(split.dropped),
            "fractions": split.realized_fractions(),
        },
    )
    return EXIT_OK


def cmd_plotdata(args) -> int:
    report = MetricReport.load(args.report)
    paths = write_plotdata(report, args.out_dir, svg=args.svg)
    _emit(args, {"written": [str(p) for p in paths]})
    return EXIT_OK


def cmd_build_index(args) -> int:
    train = load_fasta(args.train)
    labels = load_labels(args.labels) if args.labels else None
    index = build_kmer_index(train, labels, k=args.k, canonical=args.canonical)
    index.save(args.output)
    _emit(args, {"sequences": index.n_sequences, "kmers": int(len(index.vocab)), "k": index.k})
    return EXIT_OK


def cmd_predict(args) -> int:
    index = KmerIndex.load(args.index)
    if args.k is not None and args.k != index.k:
        raise UsageError(f"--k {args.k} does not match index k={index.k}")
    if args.method == "kmer" and args.mode == "unstable" and args.seed is None:
        raise UsageError("--mode unstable is randomized and needs --seed")
    queries = load_fasta(args.queries)
    categories = None
    if args.categories:
        categories = [c.strip() for c in Path(args.categories).read_text().splitlines() if c.strip()]
    if args.method == "nb":
        out = predict_nb(queries, nb_from_index(index, args.alpha), categories)
    else:
        out = predict_kmer(queries, index, args.mode, args.seed, args.evalue_threshold, categories)
    write_predictions(out, args.output)
    return EXIT_OK


_BOOL_OPTIONS = {"canonical", "no_obfuscate", "svg", "verbose"}


def _apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    values = {k: (v.lower() in ("1", "true", "yes")) if k in _BOOL_OPTIONS else v for k, v in config.items()}
    stack = [parser]
    while stack:
        p = stack.pop()
        p.set_defaults(**values)
        for action in p._actions:
            if isinstance(action, argparse._SubParsersAction):
                stack.extend(action.choices.values())


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            # string defaults go through each option's type conversion
            _apply_config(parser, read_config(known.config))
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        if getattr(args, "randomized", False) and args.seed is None:
            raise UsageError(f"`{args.command}` is randomized and needs an explicit --seed")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleSplitError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataError, AlignmentError, KeyError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
