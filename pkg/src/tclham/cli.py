"""Command-line entry point: ``tclham run|figure|rates|compare``.

Exit codes: 0 success, 1 configuration error, 2 numerical-accuracy failure,
3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .harness import (
    PRESETS,
    RealizationFailure,
    compare_curves,
    config_from_values,
    curves_from_table,
    emit,
    load_config,
    parse_config_text,
    preset,
    rates_report,
    read_csv,
    run_experiment,
)
from .model import ConfigurationError
from .propagator import IntegrationAccuracyError

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_IO = 0, 1, 2, 3


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    for key in ("methods", "realizations", "master_seed", "t_max", "sample_count", "kernel"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = str(v)
    return out


def _add_run_options(p):
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry (repeatable)")
    p.add_argument("--methods", help="comma-separated method list")
    p.add_argument("--realizations", type=int)
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--samples", dest="sample_count", type=int)
    p.add_argument("--kernel", choices=("sinc2", "exponential"))
    p.add_argument("--csv", help="write plot-ready CSV here")
    p.add_argument("--json", help="write JSON (config echo, seeds, metrics) here")
    p.add_argument("--workers", type=int, help="process count (default: $TCLHAM_WORKERS or 1)")


def _execute(cfg, args) -> int:
    result = run_experiment(cfg, workers=args.workers)
    csv_path = args.csv or cfg.output_csv
    json_path = args.json or cfg.output_json
    if csv_path:
        emit(result, "csv", csv_path)
    if json_path:
        emit(result, "json", json_path)
    summary = {"methods": list(cfg.methods), "t_max": float(result.times[-1]),
               "metrics": result.metrics, "failures": result.failures}
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_ACCURACY if result.partial else EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    return _execute(cfg, args)


def cmd_figure(args) -> int:
    cfg = config_from_values(_overrides(args), base=preset(args.figure))
    return _execute(cfg, args)


def cmd_rates(args) -> int:
    if args.params in PRESETS:
        params = preset(args.params).params
    else:
        try:
            with open(args.params) as fh:
                text = fh.read()
        except OSError as exc:
            raise OSError(f"could not read {args.params}: {exc}") from exc
        values = parse_config_text(text)
        params = config_from_values(values).params
    print(json.dumps(rates_report(params), indent=1, sort_keys=True))
    return EXIT_OK


def cmd_compare(args) -> int:
    a = curves_from_table(read_csv(args.file_a))
    b = curves_from_table(read_csv(args.file_b))
    ma = args.method_a or args.method
    mb = args.method_b or args.method
    pairs = [(ma, mb)] if ma and mb else [(m, m) for m in a if m in b]
    if not pairs:
        raise ConfigurationError("no common method columns to compare")
    report = {}
    for x, y in pairs:
        if x not in a or y not in b:
            raise ConfigurationError(f"method column missing: {x!r} in A or {y!r} in B")
        report[x if x == y else f"{x}_vs_{y}"] = compare_curves(a[x], b[y])
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tclham", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a key=value config file")
    p.add_argument("config")
    _add_run_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("figure", help="run a reference-figure preset")
    p.add_argument("figure", choices=sorted(PRESETS))
    _add_run_options(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("rates", help="print Golden-Rule and fourth-order rates")
    p.add_argument("params", help="config file with N1, N2, band_width, coupling_strength, or a preset name")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("compare", help="deviation metrics between two result CSV files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("--method", help="compare this method column in both files")
    p.add_argument("--method-a", dest="method_a")
    p.add_argument("--method-b", dest="method_b")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; that code is reserved for accuracy failures
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationAccuracyError, RealizationFailure) as exc:
        print(f"numerical accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
