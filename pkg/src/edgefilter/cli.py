"""Command-line entry point.

Exit codes: 0 success, 2 input or validation error, 3 numerical failure,
4 at least one scenario failed (the rest still ran).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from edgefilter._io import atomic_write_text
from edgefilter.evaluation import (
    ScenarioError,
    ScenarioReport,
    SpecError,
    data_reduction,
    load_scenarios,
    render_table,
    round_half_up,
    run_scenarios,
)
from edgefilter.filter import FilterConfig, FilterError, run_session
from edgefilter.ingest import (
    CsvSchema,
    IngestError,
    chrono_split,
    fit_norm,
    make_windows,
    parse_csv,
    resample,
    write_csv,
)
from edgefilter.predictor import (
    ConfigError,
    DimensionError,
    NumericalError,
    PersistenceModel,
    TrainConfig,
    TrainingDiverged,
    WeightFileError,
    load_weights,
    save_weights,
    train,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4

INPUT_ERRORS = (IngestError, SpecError, ConfigError, FilterError, WeightFileError, DimensionError, ScenarioError)


def _err(msg: str) -> None:
    print(f"edgefilter: error: {msg}", file=sys.stderr)


def cmd_ingest(args) -> int:
    frame, report = parse_csv(args.input, CsvSchema.from_string(args.schema),
                              source_id=args.source_id, kind=args.kind)
    if args.resample:
        frame = resample(frame, args.resample)
    if args.out:
        write_csv(frame, args.out)
    print(report.to_line(), file=sys.stderr)
    return EXIT_OK


def _load_train_config(path: str | None, seed: int) -> tuple[TrainConfig, int]:
    data = {}
    if path:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping")
    window = int(data.pop("window", 24))
    data["seed"] = seed
    return TrainConfig.from_dict(data), window


def cmd_train(args) -> int:
    cfg, window = _load_train_config(args.config, args.seed)
    frame, _ = parse_csv(args.data, CsvSchema.from_string(args.schema), source_id=args.source_id, kind=args.kind)
    stats = fit_norm(frame)
    tr, va = chrono_split(make_windows(frame, window, stats), 1.0 - cfg.val_frac)

    def show(epoch, train_mse, val_mse, lr):
        print(f"epoch {epoch} train_mse={train_mse:.6e} val_mse={val_mse:.6e} lr={lr:.3g}", flush=True)

    try:
        weights, report = train(tr, va, cfg, source_id=frame.source_id, kind=frame.kind, on_epoch=show)
    except TrainingDiverged as exc:
        _err(f"training diverged: {exc}")
        return EXIT_NUMERIC
    save_weights(weights, args.out_weights)
    print(
        f"best_epoch={report.best_epoch} best_val_mse={report.best_val_mse:.6e} "
        f"stop_epoch={report.stop_epoch} final_lr={report.final_lr:.3g}"
    )
    if args.report:
        atomic_write_text(args.report, json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.model == "persistence":
        model = PersistenceModel(window=args.k)
    else:
        if not args.weights:
            raise FilterError("--weights is required with --model lstm")
        model = load_weights(args.weights)
        if model.window != args.k:
            raise FilterError(f"weight file window is {model.window} but --k is {args.k}")
    cfg = FilterConfig(args.epsilon, args.k, args.policy, args.sync)
    frame, _ = parse_csv(args.data, CsvSchema.from_string(args.schema))
    tlog, recon = run_session(frame, model, cfg)
    if args.out_log:
        tlog.write_csv(args.out_log)
    if args.out_recon:
        recon.write_csv(args.out_recon)
    red = round_half_up(data_reduction(tlog.total, tlog.transmitted), 2)
    print(f"total={tlog.total} transmitted={tlog.transmitted} reduction={red}%")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    specs = load_scenarios(args.scenarios)
    results = run_scenarios(specs, args.data_root, args.cache_dir, args.workers)
    reports, failures = [], []
    for spec, res in zip(specs, results):
        label = spec.label or spec.name.value
        if isinstance(res, Exception):
            failures.append({"scenario": label, "error": f"{type(res).__name__}: {res}"})
        else:
            reports.append(res.to_dict())
    atomic_write_text(args.out, json.dumps({"reports": reports, "failures": failures}, indent=2) + "\n")
    print(f"scenarios={len(specs)} succeeded={len(reports)} failed={len(failures)}")
    for f in failures:
        print(f"FAILED {f['scenario']}: {f['error']}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_report(args) -> int:
    try:
        doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
        reports = [ScenarioReport.from_dict(r) for r in doc["reports"]]
    except OSError as exc:
        raise SpecError(f"cannot read {args.input}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise SpecError(f"{args.input} is not a report file: {exc}") from exc
    if not reports:
        raise SpecError(f"{args.input} contains no reports")
    text = render_table(reports, args.format)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgefilter", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="validate, canonicalize and optionally resample a CSV series")
    s.add_argument("--input", required=True)
    s.add_argument("--schema", help="column mapping, e.g. timestamp=time,value=t2m")
    s.add_argument("--resample", type=int, metavar="SECONDS")
    s.add_argument("--out")
    s.add_argument("--source-id")
    s.add_argument("--kind", default="in_situ", choices=["in_situ", "satellite"])
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", help="train the LSTM forecaster and write a weight file")
    s.add_argument("--data", required=True)
    s.add_argument("--config", help="YAML training config (TrainConfig fields plus 'window')")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out-weights", required=True)
    s.add_argument("--report", help="optional JSON training report path")
    s.add_argument("--schema")
    s.add_argument("--source-id")
    s.add_argument("--kind", default="in_situ", choices=["in_situ", "satellite"])
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("run", help="run an edge/cloud filter session over a series")
    s.add_argument("--data", required=True)
    s.add_argument("--weights")
    s.add_argument("--model", choices=["lstm", "persistence"], default="lstm")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--k", type=int, default=24)
    s.add_argument("--policy", default="reset_on_transmit", choices=["reset_on_transmit", "sliding"])
    s.add_argument("--sync", default="synchronized", choices=["synchronized", "paper_faithful"])
    s.add_argument("--out-log")
    s.add_argument("--out-recon")
    s.add_argument("--schema")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("evaluate", help="run every scenario in a scenario file")
    s.add_argument("--scenarios", required=True)
    s.add_argument("--data-root", default=".")
    s.add_argument("--out", required=True)
    s.add_argument("--cache-dir")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", help="render evaluation results as a table")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        _err(str(exc))
        return EXIT_INPUT
    except NumericalError as exc:
        _err(f"numerical failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
