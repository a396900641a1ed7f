"""Command-line entry point: run experiments, regenerate reports, sweep.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or config
error, 3 numeric abort (blow-up, lost convergence, failed bracketing).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import ConfigError, EXPERIMENTS, load_config
from .experiments import run_experiment
from .flows import BlowUpError
from .modulation import NoConvergenceError, RegimeExitError
from .report import ReportError, render_report
from .scattering import ShootingError

NUMERIC_ABORTS = (BlowUpError, RegimeExitError, NoConvergenceError, ShootingError)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gkdv-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment recipe")
    run_p.add_argument("--config", type=Path, default=None, help="sectioned key=value config file")
    run_p.add_argument("--experiment", choices=EXPERIMENTS, default=None)
    run_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config value")
    run_p.add_argument("--output", type=Path, default=None, help="output directory override")
    run_p.add_argument("--sweep", default=None, metavar="SECTION.KEY=V1,V2,...",
                       help="fan one key over several values, one run per value")

    rep_p = sub.add_parser("report", help="summarize a completed run directory")
    rep_p.add_argument("run_dir", type=Path)
    return parser


def _single_run(args, extra_overrides: list[str], outdir: Path | None) -> int:
    overrides = list(args.overrides) + extra_overrides
    if args.experiment:
        overrides.append(f"experiment={args.experiment}")
    if outdir is not None:
        overrides.append(f"output_dir={outdir}")
    config = load_config(args.config, overrides)
    report = run_experiment(config)
    ok = report["passed"]
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: measured {check['measured']:.6g}")
    print(json.dumps({"experiment": report["experiment"], "passed": ok}))
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            text, summary = render_report(args.run_dir)
            print(text)
            return 0 if summary["passed"] else 1

        if args.sweep:
            if "=" not in args.sweep:
                raise ConfigError("--sweep must look like section.key=v1,v2,...")
            key, raw_vals = args.sweep.split("=", 1)
            values = [v for v in raw_vals.split(",") if v]
            if not values:
                raise ConfigError("--sweep requires at least one value")
            max_workers = int(os.environ.get("GKDV_LAB_THREADS", "2"))
            base_out = args.output or Path(load_config(args.config, args.overrides).output_dir)

            def one(i_val):
                i, val = i_val
                sub_out = Path(base_out) / f"sweep_{i:03d}"
                return _single_run(args, [f"{key}={val}"], sub_out)

            with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
                codes = list(pool.map(one, enumerate(values)))
            return max(codes)

        return _single_run(args, [], args.output)

    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ReportError as exc:
        print(json.dumps({"error": "report", "message": str(exc)}), file=sys.stderr)
        return 2
    except NUMERIC_ABORTS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
