"""Command-line entry point.

Subcommands::

    run      --config FILE [--out DIR] [--parallel N]
    report   --in DIR --format csv|json|md
    gen-data --spec FILE --out FILE

Errors are printed to stderr as one JSON object and the process exits
nonzero (2 for bad input, 1 for runtime failures).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datagen import DataError, SynthSpec, generate, save_csv
from .experiments import ConfigError, ReportError, load_config, load_report, report_emit, run_suite
from .model import ConfigError as ModelConfigError

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2


class CLIError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_INPUT) -> None:
        super().__init__(message)
        self.kind = kind
        self.code = code


def _cmd_run(args: argparse.Namespace) -> int:
    configs = load_config(args.config)
    out = args.out or configs[0].output_dir or Path("runs") / Path(args.config).stem
    report = run_suite(configs, parallel=args.parallel)
    written = report_emit(report, out, "csv") + report_emit(report, out, "json")
    for path in written:
        print(path)
    failed = [r for r in report.runs if r.error]
    if failed:
        print(f"warning: {len(failed)} run(s) diverged", file=sys.stderr)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    report = load_report(args.input)
    out = args.out or args.input
    for path in report_emit(report, out, args.format):
        print(path)
    return EXIT_OK


def _cmd_gen_data(args: argparse.Namespace) -> int:
    path = Path(args.spec)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CLIError("ConfigError", f"{path}: invalid JSON ({exc})") from exc
    data.pop("schema_version", None)
    try:
        spec = SynthSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise CLIError("ConfigError", f"{path}: {exc}") from exc
    print(save_csv(generate(spec), args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curriculum-sched",
        description="Curriculum sampling experiments on synthetic hierarchical data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every strategy of a suite over all seeds")
    run.add_argument("--config", required=True, help="suite config (JSON, schema_version 1)")
    run.add_argument("--out", help="output directory (default: config output_dir or runs/<config stem>)")
    run.add_argument("--parallel", type=int, default=1, help="worker processes (default 1)")
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="re-emit tables from a finished run directory")
    rep.add_argument("--in", dest="input", required=True, help="directory holding report.json")
    rep.add_argument("--format", choices=("csv", "json", "md"), default="md")
    rep.add_argument("--out", help="write here instead of the input directory")
    rep.set_defaults(func=_cmd_report)

    gen = sub.add_parser("gen-data", help="materialize a synthetic dataset as CSV")
    gen.add_argument("--spec", required=True, help="dataset spec (JSON)")
    gen.add_argument("--out", required=True, help="output CSV; a .taxonomy.json sidecar is written next to it")
    gen.set_defaults(func=_cmd_gen_data)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        return _fail("UsageError", "invalid command line (see --help)", EXIT_INPUT)
    if getattr(args, "parallel", 1) < 1:
        return _fail("UsageError", "--parallel must be at least 1", EXIT_INPUT)
    try:
        return args.func(args)
    except CLIError as exc:
        return _fail(exc.kind, str(exc), exc.code)
    except (ConfigError, ModelConfigError, DataError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_INPUT)
    except FileNotFoundError as exc:
        return _fail("FileNotFoundError", str(exc), EXIT_INPUT)
    except ReportError as exc:
        return _fail("ReportError", str(exc), EXIT_RUNTIME)
    except Exception as exc:  # noqa: BLE001 - last-resort machine-readable error
        return _fail(type(exc).__name__, str(exc), EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
