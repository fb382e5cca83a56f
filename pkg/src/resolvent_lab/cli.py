"""``resolvent-lab`` command line.

    resolvent-lab run --config CONFIG.json [--seed N] [--out DIR]
    resolvent-lab render DIR/report.json

Exit codes for ``run``: 0 when every check passes, 2 when some check
fails, 1 for usage or config errors.
"""
import argparse
import json
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np
import scipy

from . import __version__, experiments
from .errors import ConfigError, ParseError

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".6g")
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if v is None:
        return ""
    return str(v)


def load_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            report = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read report: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(report, dict) or not isinstance(report.get("experiments", []), list):
        raise ParseError("report must be an object with an 'experiments' list")
    return report


def render(report, warn=None):
    """Markdown table with one row per check."""
    lines = [
        "| experiment | check | claim | value | bound | verdict |",
        "|---|---|---|---|---|---|",
    ]
    for exp in report.get("experiments", []):
        if not isinstance(exp, dict) or not isinstance(exp.get("checks", []), list):
            raise ParseError("each experiment must be an object with a 'checks' list")
        for c in exp.get("checks", []):
            if not isinstance(c, dict) or "name" not in c:
                raise ParseError("each check must be an object with a 'name'")
            name = c["name"]
            if name not in experiments.KNOWN_CHECKS and not name.endswith("_error") and warn:
                warn(f"unknown check {name!r} rendered verbatim")
            bound = c.get("bound")
            if c.get("tolerance") is not None:
                bound = f"{_fmt(bound)} ± {_fmt(c['tolerance'])}" if bound is not None else \
                    f"tol {_fmt(c['tolerance'])}"
            verdict = "pass" if c.get("passed") else "FAIL"
            lines.append("| {} | {} | {} | {} | {} | {} |".format(
                exp.get("name", ""), name, c.get("claim", ""), _fmt(c.get("value")),
                _fmt(bound), verdict))
    return "\n".join(lines) + "\n"


def cmd_run(args):
    try:
        cfg = experiments.load_config(args.config, seed=args.seed, output_dir=args.out)
        threads = experiments.thread_count()
    except ConfigError as exc:
        print(f"config error in field '{exc.field}': {exc}", file=sys.stderr)
        return EXIT_CONFIG
    started = datetime.now(timezone.utc)
    results, timings = {}, {}
    for name in cfg.experiments:
        t0 = time.perf_counter()
        results[name] = experiments.run_experiment(name, cfg)
        timings[name] = time.perf_counter() - t0
        failed = [c["name"] for c in results[name]["checks"] if not c["passed"]]
        status = "ok" if not failed else "failed: " + ", ".join(failed)
        print(f"{name}: {status} ({timings[name]:.1f} s)", file=sys.stderr)
    report = experiments.build_report(cfg, results)
    metadata = {
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "seconds": timings,
        "threads": threads,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    experiments.write_outputs(cfg, results, report, metadata)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def cmd_render(args):
    try:
        report = load_report(args.report)
        text = render(report, warn=lambda msg: print(f"warning: {msg}", file=sys.stderr))
    except ParseError as exc:
        print(f"cannot render report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="resolvent-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiments named in a config file")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.set_defaults(func=cmd_run)
    p_render = sub.add_parser("render", help="print a report as a markdown table")
    p_render.add_argument("report", help="path to report.json")
    p_render.set_defaults(func=cmd_render)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; the contract reserves 2 for failed checks
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
