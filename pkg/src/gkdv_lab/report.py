"""Post-run reporting: summary tables and plot-ready CSV extraction."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class ReportError(RuntimeError):
    """The run directory is missing required artifacts."""


def load_run(run_dir: str | Path) -> dict:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ReportError(f"{run_dir} is not a run directory")
    report_path = run_dir / "report.json"
    meta_path = run_dir / "meta.json"
    if not report_path.exists() or not meta_path.exists():
        raise ReportError(f"{run_dir} lacks report.json/meta.json; incomplete run?")
    try:
        report = json.loads(report_path.read_text())
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"corrupt artifact in {run_dir}: {exc}") from exc
    return {"report": report, "meta": meta, "dir": run_dir}


def summary_table(loaded: dict) -> str:
    rows = [("check", "measured", "expected", "tol", "pass")]
    for ch in loaded["report"]["checks"]:
        rows.append((
            ch["name"],
            f"{ch['measured']:.6g}",
            f"{ch['expected']:.6g}" if ch["comparator"] == "abs_diff" else ch["comparator"],
            f"{ch['tol']:.2g}" if ch["comparator"] == "abs_diff" else f"{ch['expected']:.3g}",
            "PASS" if ch["passed"] else "FAIL",
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = ["  ".join(r[i].ljust(widths[i]) for i in range(5)) for r in rows]
    lines.insert(1, "-" * (sum(widths) + 8))
    verdict = "ALL CHECKS PASSED" if loaded["report"]["passed"] else "CHECK FAILURES PRESENT"
    return "\n".join(lines) + f"\n\n{verdict}\n"


def _monotone_verdict(values: np.ndarray) -> dict:
    diffs = np.diff(values)
    frac = float(np.mean(diffs <= 1e-12)) if diffs.size else 1.0
    return {
        "nonincreasing_fraction": frac,
        "verdict": "monotone" if frac >= 0.99 else ("mostly" if frac >= 0.9 else "not monotone"),
    }


def emit_plot_data(loaded: dict) -> list[Path]:
    """Derive plot-ready CSVs from the run artifacts; returns written paths."""
    run_dir = loaded["dir"]
    written = []
    mod_csv = run_dir / "modulation.csv"
    if mod_csv.exists():
        rows = mod_csv.read_text().strip().split("\n")
        header = rows[0].split(",")
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        col = {name: data[:, i] for i, name in enumerate(header)}
        out = run_dir / "plot_modulation.csv"
        lines = ["t,c,y_minus_c2t,ip_wQ,ip_wQp,i_eta_rate"]
        t = col["t"]
        i_eta = col["i_eta"]
        rate = np.gradient(i_eta, t)
        for i in range(t.size):
            lines.append(
                f"{t[i]:.17g},{col['c'][i]:.17g},"
                f"{col['y'][i] - col['c'][i]**2 * t[i]:.17g},"
                f"{col['ip_wQ'][i]:.17g},{col['ip_wQp'][i]:.17g},{rate[i]:.17g}"
            )
        out.write_text("\n".join(lines) + "\n")
        written.append(out)
        loaded["report"]["i_eta_monotonicity"] = _monotone_verdict(i_eta)
    res_csv = run_dir / "residual_curve.csv"
    if res_csv.exists():
        written.append(res_csv)
    return written


def render_report(run_dir: str | Path) -> tuple[str, dict]:
    loaded = load_run(run_dir)
    paths = emit_plot_data(loaded)
    text = summary_table(loaded)
    if "i_eta_monotonicity" in loaded["report"]:
        verdict = loaded["report"]["i_eta_monotonicity"]
        text += (
            f"\nvirial functional monotonicity: {verdict['verdict']} "
            f"(nonincreasing fraction {verdict['nonincreasing_fraction']:.3f})\n"
        )
    summary = {
        "experiment": loaded["report"]["experiment"],
        "passed": loaded["report"]["passed"],
        "checks": loaded["report"]["checks"],
        "plot_data": [str(p) for p in paths],
    }
    if "i_eta_monotonicity" in loaded["report"]:
        summary["i_eta_monotonicity"] = loaded["report"]["i_eta_monotonicity"]
    (Path(run_dir) / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    return text, summary
