"""Command-line interface: ``robustrec {run,inspect,chart}``.

Exit codes: 0 success, 1 runtime failure, 2 bad config/arguments or
unreadable report, 3 dataset error. Tables go to stdout, diagnostics to
stderr.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .data import activity_counts, split_ratio
from .errors import ConfigError, DataError
from .harness import load_config, load_dataset, run_experiment
from .report import DEFAULT_FORMATS, emit_chart, emit_report, load_report

log = logging.getLogger("robustrec")

EXIT_RUNTIME, EXIT_CONFIG, EXIT_DATA = 1, 2, 3
TOP_VALUES = 10


def _fmt(v):
    return "NA" if v is None else f"{v:.6f}"


def print_table(report, out=None):
    out = out or sys.stdout
    out.write("model\tmetric\tbaseline\tperturbed\tpct_change\n")
    for e in report.entries:
        out.write("\t".join([
            e.model, e.metric,
            _fmt(e.baseline.value if e.baseline else None),
            _fmt(e.perturbed.value if e.perturbed else None),
            _fmt(e.percent_change),
        ]) + "\n")


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    out_dir = args.out_dir or config.output.get("directory")
    if out_dir is None:
        raise ConfigError("no output directory: pass --out-dir or set output.directory")
    out_dir = Path(out_dir) if args.out_dir else config.resolve(out_dir)
    formats = list(config.output.get("formats", DEFAULT_FORMATS))
    chart = args.chart or "svg" in formats
    formats = [f for f in formats if f != "svg"]

    report = run_experiment(config)
    written = emit_report(report, out_dir, formats)
    if chart:
        if report.changes:
            written["svg"] = emit_chart(report, out_dir / "chart.svg")
        else:
            log.warning("no percent-change entries; chart skipped")
    print_table(report)
    for fmt, path in written.items():
        log.info("wrote %s report to %s", fmt, path)
    return 0


def _marginals(name, values, domain, out):
    counts = {v: int(np.sum(values == v)) for v in domain}
    total = max(1, values.size)
    ranked = sorted(domain, key=lambda v: (-counts[v], domain.index(v)))
    shown = ranked if len(domain) <= 30 else ranked[:TOP_VALUES]
    out.write(f"  {name}:\n")
    for v in shown:
        out.write(f"    {v}\t{counts[v]}\t{100.0 * counts[v] / total:.2f}%\n")
    if len(shown) < len(domain):
        out.write(f"    ... {len(domain) - len(shown)} more values\n")


def cmd_inspect(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    dataset = load_dataset(config)
    split = split_ratio(dataset, config.ratios, config.split_seed_value())
    out = sys.stdout
    out.write(f"users\t{dataset.n_users}\n")
    out.write(f"items\t{dataset.n_items}\n")
    out.write(f"interactions\t{dataset.n_interactions}\n")
    out.write(f"split\ttrain={split.train.size}\tvalid={split.valid.size}\ttest={split.test.size}\n")

    for side in ("user", "item"):
        table = dataset.features(side)
        if not len(table):
            continue
        codes = (dataset.users if side == "user" else dataset.items)[split.train]
        out.write(f"train marginals ({side} features, over train interactions):\n")
        for schema in table.schemas:
            vals = table.column(schema.name)[codes]
            if schema.is_categorical:
                _marginals(schema.name, vals, list(schema.domain), out)
            else:
                out.write(f"  {schema.name}:\tmin={vals.min():g}\tmean={vals.mean():.4f}\tmax={vals.max():g}\n")

    counts = activity_counts(dataset, split.train)
    counts = counts[counts > 0]
    if counts.size:
        qs = (0.0, 0.25, 0.5, 0.75, 1.0)
        out.write("train activity quantiles:\t" +
                  "\t".join(f"q{q:g}={np.quantile(counts, q):g}" for q in qs) + "\n")
    return 0


def cmd_chart(args) -> int:
    try:
        report = load_report(args.report)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from None
    if not report.changes:
        raise ConfigError(f"report {args.report} has no percent-change entries")
    emit_chart(report, args.output)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="robustrec", description="Robustness evaluation for recommender models.")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one baseline-vs-perturbed experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out-dir")
    run.add_argument("--seed", type=int)
    run.add_argument("--chart", action="store_true", help="also write chart.svg")
    run.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    run.set_defaults(func=cmd_run)

    ins = sub.add_parser("inspect", help="print dataset and train-split statistics")
    ins.add_argument("--config", required=True)
    ins.add_argument("--seed", type=int)
    ins.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    ins.set_defaults(func=cmd_inspect)

    ch = sub.add_parser("chart", help="render chart.svg from a saved report.json")
    ch.add_argument("report")
    ch.add_argument("output")
    ch.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    ch.set_defaults(func=cmd_chart)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"robustrec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"robustrec: dataset error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"robustrec: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
