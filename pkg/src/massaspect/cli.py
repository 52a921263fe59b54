"""Command line: ``massaspect run --config cfg.json``, ``list-scenarios``, ``--version``.

Exit codes: 0 when every gate passes, 2 for configuration errors, 3 for
numerical failures (failed gates, non-convergence, solver errors).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .config import SCENARIOS, RunConfig
from .scenarios import ScenarioOutcome, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
CSV_HEADER = ("k_or_r", "charge", "extrapolated", "error_est")


def list_scenarios() -> str:
    width = max(len(k) for k in SCENARIOS)
    return "\n".join(f"{name:<{width}}  {desc}" for name, desc in SCENARIOS.items())


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    return RunConfig.model_validate_json(text)


def _finite(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def summary_dict(cfg: RunConfig, out: ScenarioOutcome) -> dict:
    charges = {
        name: {
            "samples": [[k, v] for k, v in res.samples],
            "extrapolated": res.extrapolated,
            "error_estimate": res.error_estimate,
            "converged": res.converged,
            "diagnostics": res.diagnostics,
        }
        for name, res in out.charges.items()
    }
    gates = {name: {"value": g.value, "threshold": g.threshold, "passed": g.passed}
             for name, g in out.gates.items()}
    return _finite({
        "version": __version__,
        "scenario": cfg.scenario,
        "dimension": cfg.dimension,
        "passed": all(g.passed for g in out.gates.values()),
        "gates": gates,
        "mass_vector": out.mass_vector,
        "primary_charge": out.primary,
        "charges": charges,
        "metrics": out.metrics,
    })


def write_csv(path: Path, out: ScenarioOutcome) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        if out.primary is None:
            return
        res = out.charges[out.primary]
        for k, v in res.samples:
            w.writerow([repr(float(k)), repr(float(v)), repr(res.extrapolated), repr(res.error_estimate)])


def convergence_svg(samples, extrapolated: float, title: str, width: int = 480, height: int = 300) -> str:
    """Line chart of charge samples against k with the extrapolated level dashed."""
    ks = [float(k) for k, _ in samples]
    vs = [float(v) for _, v in samples]
    lo, hi = min(vs + [extrapolated]), max(vs + [extrapolated])
    pad = 0.05 * (hi - lo) if hi > lo else max(1e-12, 0.05 * abs(hi) or 1.0)
    lo, hi = lo - pad, hi + pad
    k0, k1 = min(ks), max(ks)
    k1 = k1 if k1 > k0 else k0 + 1.0
    left, right, top, bottom = 60, 20, 30, 40

    def px(k):
        return left + (k - k0) / (k1 - k0) * (width - left - right)

    def py(v):
        return top + (hi - v) / (hi - lo) * (height - top - bottom)

    pts = " ".join(f"{px(k):.2f},{py(v):.2f}" for k, v in zip(ks, vs))
    dots = "".join(f'<circle cx="{px(k):.2f}" cy="{py(v):.2f}" r="3" fill="#1f77b4"/>' for k, v in zip(ks, vs))
    ticks = "".join(
        f'<text x="{px(k):.2f}" y="{height - bottom + 16}" font-size="11" text-anchor="middle">{k:g}</text>'
        for k in ks)
    ye = py(extrapolated)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
        f'<text x="{width / 2:.1f}" y="18" font-size="13" text-anchor="middle">{title}</text>'
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>'
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>'
        f'<text x="{left - 6}" y="{py(hi - pad):.2f}" font-size="11" text-anchor="end">{hi - pad:.6g}</text>'
        f'<text x="{left - 6}" y="{py(lo + pad):.2f}" font-size="11" text-anchor="end">{lo + pad:.6g}</text>'
        f'<line x1="{left}" y1="{ye:.2f}" x2="{width - right}" y2="{ye:.2f}" stroke="#d62728" '
        f'stroke-dasharray="6,4"/>'
        f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>{dots}{ticks}'
        f'<text x="{(left + width - right) / 2:.1f}" y="{height - 6}" font-size="12" '
        f'text-anchor="middle">cutoff k</text></svg>\n'
    )


def run(cfg: RunConfig, out_dir: Path, plots: bool = True) -> tuple[dict, float]:
    """Run a scenario and write its files; returns (summary, seconds)."""
    t0 = time.perf_counter()
    outcome = run_scenario(cfg)
    elapsed = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summary_dict(cfg, outcome)
    (out_dir / cfg.output.summary).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_csv(out_dir / cfg.output.csv, outcome)
    if plots and outcome.primary is not None:
        res = outcome.charges[outcome.primary]
        (out_dir / cfg.output.plot).write_text(
            convergence_svg(res.samples, res.extrapolated, f"{cfg.scenario}: {outcome.primary}"))
    return summary, elapsed


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="massaspect", description="Mass and mass-aspect charges on H^n.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario from a JSON config")
    r.add_argument("--config", required=True, help="path to the JSON run configuration")
    r.add_argument("--out", default=".", help="output directory (default: current directory)")
    r.add_argument("--no-plots", action="store_true", help="skip the SVG convergence plot")
    sub.add_parser("list-scenarios", help="list available scenarios")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        print(list_scenarios())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            print(f"config error: {loc}: {err['msg']}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary, elapsed = run(cfg, Path(args.out), plots=not args.no_plots)
    except (ArithmeticError, RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, g in summary["gates"].items():
        print(f"{'PASS' if g['passed'] else 'FAIL'}  {name}: {g['value']} (<= {g['threshold']})")
    if summary["mass_vector"] is not None:
        print("mass vector:", " ".join(f"{v:.6g}" for v in summary["mass_vector"]))
    print(f"elapsed: {elapsed:.2f} s")
    if not summary["passed"]:
        print("numerical failure: one or more gates failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
