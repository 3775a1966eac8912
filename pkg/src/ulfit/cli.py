"""Command-line front end: bound, fit, simulate, and compare reports.

Outputs are plain CSV/JSON plus a small manifest written atomically next
to each output, so any result can be audited and reproduced. Exit codes:
0 success, 2 input/schema problem, 3 numeric failure, 4 scenario-hash
mismatch between compared artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bound import total_bound, l_stats
from .channel import shadow_stats
from .errors import (
    DomainError,
    EmptyRegion,
    NoConvergence,
    ParseError,
    PlacementFailure,
    QuadratureFailure,
    SamplingStall,
    SchemaError,
)
from .fit import (
    PowerLognormalFit,
    gaussian_step1,
    gaussian_step2,
    power_lognormal_fit,
    powln_cdf_db,
)
from .montecarlo import (
    EmpiricalCdf,
    dkw_slack,
    ks_distance,
    load_samples,
    save_samples,
    simulate_aggregate,
)
from .scenario import load_scenario, scenario_hash

__all__ = [
    "main",
    "cmd_bound",
    "cmd_fit",
    "cmd_simulate",
    "cmd_compare",
    "compare_verdict",
    "parse_grid",
]

_NUMERIC_ERRORS = (
    DomainError,
    EmptyRegion,
    QuadratureFailure,
    NoConvergence,
    SamplingStall,
    PlacementFailure,
)

_BOUND_COLUMNS = (
    "eps1",
    "eps2",
    "eps1_prime",
    "eps2_prime",
    "eps3",
    "eps_total",
    "mu_l",
    "sigma_l2",
)


def _g17(x) -> str:
    return format(float(x), ".17g")


def parse_grid(spec: str) -> np.ndarray:
    """Inclusive dBm grid from a "lo:hi:step" string."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise SchemaError(f"grid: expected lo:hi:step, got {spec!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise SchemaError(f"grid: non-numeric field in {spec!r}") from exc
    if not step > 0:
        raise SchemaError("grid: step must be > 0")
    if hi < lo:
        raise SchemaError("grid: hi must be >= lo")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _write_manifest(out_path: str, doc: dict) -> None:
    """Atomic manifest write next to an output file."""
    path = f"{out_path}.manifest.json"
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _manifest(command, scen_hash, bound, seed, n, outputs) -> dict:
    return {
        "command": command,
        "scenario_hash": scen_hash,
        "bound": bound,
        "seed": seed,
        "n": n,
        "tool_version": __version__,
        "outputs": list(outputs),
    }


def _bound_doc(bp) -> dict:
    return {"omega": bp.omega, "p": bp.p, "k1": bp.k1, "k2": bp.k2}


def _cell_reports(scenario):
    """(cell, LStats, BoundReport) per cell; errors name the cell."""
    out = []
    for cell in scenario.cells:
        try:
            stats = l_stats(cell, scenario.victim_bs, scenario.channel)
            report = total_bound(
                cell,
                scenario.victim_bs,
                scenario.channel,
                scenario.fading,
                scenario.bound,
                stats=stats,
            )
        except _NUMERIC_ERRORS as exc:
            raise type(exc)(f"cell {cell.id}: {exc}") from exc
        out.append((cell, stats, report))
    return out


def cmd_bound(scenario_path, out_csv) -> int:
    """Per-cell error-bound CSV with a max summary row."""
    scenario = load_scenario(scenario_path)
    scen_hash = scenario_hash(scenario)
    rows = []
    for cell, _, report in _cell_reports(scenario):
        rows.append([cell.id] + [getattr(report, c) for c in _BOUND_COLUMNS])
    maxima = ["max"] + [
        max(row[i + 1] for row in rows) for i in range(len(_BOUND_COLUMNS))
    ]
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write("cell_id," + ",".join(_BOUND_COLUMNS) + "\n")
        for row in rows + [maxima]:
            fh.write(
                str(row[0]) + "," + ",".join(_g17(v) for v in row[1:]) + "\n"
            )
    _write_manifest(
        str(out_csv),
        _manifest(
            "bound", scen_hash, _bound_doc(scenario.bound), None, None, [str(out_csv)]
        ),
    )
    return 0


def cmd_fit(scenario_path, out_json, grid_spec=None) -> int:
    """Per-cell Gaussian fits plus the aggregate power-lognormal fit.

    With a grid, also writes the analytic CDF to <out_json>.cdf.csv.
    """
    grid = parse_grid(grid_spec) if grid_spec is not None else None
    scenario = load_scenario(scenario_path)
    scen_hash = scenario_hash(scenario)
    shadow = shadow_stats(scenario.channel)

    per_cell = []
    fits = []
    for cell, stats, report in _cell_reports(scenario):
        g1 = gaussian_step1(stats, shadow, scenario.channel.p0_dbm)
        g2 = gaussian_step2(g1, scenario.fading)
        fits.append(g2)
        per_cell.append(
            {
                "cell_id": cell.id,
                "mu_g_dbm": g1.mu,
                "sigma_g2_db2": g1.sigma2,
                "mu_q_dbm": g2.mu,
                "sigma_q2_db2": g2.sigma2,
                **{c: getattr(report, c) for c in _BOUND_COLUMNS[:6]},
            }
        )
    agg = power_lognormal_fit(fits)
    doc = {
        "lambda": agg.lam,
        "mu_q_dbm": agg.mu_q,
        "sigma_q2_db2": agg.sigma_q2,
        "scenario_hash": scen_hash,
        "eps_total": max(c["eps_total"] for c in per_cell),
        "bound": _bound_doc(scenario.bound),
        "per_cell": per_cell,
    }
    with open(out_json, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs = [str(out_json)]
    if grid is not None:
        cdf_csv = f"{out_json}.cdf.csv"
        vals = powln_cdf_db(grid, agg)
        vals = np.atleast_1d(vals)
        with open(cdf_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write("q_dbm,cdf\n")
            for q, v in zip(grid, vals):
                fh.write(f"{_g17(q)},{_g17(v)}\n")
        outputs.append(cdf_csv)
    _write_manifest(
        str(out_json),
        _manifest("fit", scen_hash, _bound_doc(scenario.bound), None, None, outputs),
    )
    return 0


def cmd_simulate(scenario_path, n, seed, out_bin, workers=1) -> int:
    """Aggregate-interference sample file plus sidecar and manifest."""
    scenario = load_scenario(scenario_path)
    scen_hash = scenario_hash(scenario)
    samples = simulate_aggregate(scenario, n, seed, workers=workers)
    save_samples(samples, out_bin, scen_hash)
    _write_manifest(
        str(out_bin),
        _manifest(
            "simulate",
            scen_hash,
            _bound_doc(scenario.bound),
            seed,
            n,
            [str(out_bin), f"{out_bin}.json"],
        ),
    )
    return 0


def compare_verdict(ks: float, eps_total: float, n: int, alpha: float = 0.01) -> dict:
    """Soundness verdict: measured KS against bound plus sampling noise."""
    slack = dkw_slack(n, alpha)
    return {
        "ks_empirical_vs_fit": ks,
        "eps_total": eps_total,
        "dkw_slack": slack,
        "pass": bool(ks <= eps_total + slack),
    }


def cmd_compare(samples_path, fit_json, out_report) -> int:
    """KS of empirical samples against a fitted CDF, with verdict."""
    samples, sidecar = load_samples(samples_path)
    try:
        with open(fit_json, encoding="utf-8") as fh:
            fit_doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{fit_json}: {exc}") from exc
    try:
        fit = PowerLognormalFit(
            float(fit_doc["lambda"]),
            float(fit_doc["mu_q_dbm"]),
            float(fit_doc["sigma_q2_db2"]),
        )
        eps_total = float(fit_doc["eps_total"])
        fit_hash = str(fit_doc["scenario_hash"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{fit_json}: missing or bad field ({exc})") from exc
    if fit_hash != str(sidecar["scenario_hash"]):
        print(
            f"error: scenario hash mismatch: samples {sidecar['scenario_hash']}"
            f" vs fit {fit_hash}",
            file=sys.stderr,
        )
        return 4
    ks = ks_distance(EmpiricalCdf(samples), lambda q: powln_cdf_db(q, fit))
    verdict = compare_verdict(ks, eps_total, samples.n)
    with open(out_report, "w", encoding="utf-8") as fh:
        json.dump(verdict, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(
        str(out_report),
        _manifest(
            "compare",
            fit_hash,
            fit_doc.get("bound"),
            samples.seed,
            samples.n,
            [str(out_report)],
        ),
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ulfit",
        description="Uplink interference bounds, fits, and simulation checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="per-cell error-bound CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="Gaussian and power-lognormal fits (JSON)")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", help="dBm CDF grid as lo:hi:step")

    p = sub.add_parser("simulate", help="aggregate-interference samples")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("compare", help="KS verdict of samples vs a fit")
    p.add_argument("--samples", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    # Grid specs start with "-" for dBm values; merge so argparse does
    # not mistake them for option names.
    argv = list(argv)
    for i, tok in enumerate(argv[:-1]):
        if tok == "--grid":
            argv[i : i + 2] = [f"--grid={argv[i + 1]}"]
            break
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "bound":
            return cmd_bound(args.scenario, args.out)
        if args.command == "fit":
            return cmd_fit(args.scenario, args.out, args.grid)
        if args.command == "simulate":
            return cmd_simulate(
                args.scenario, args.n, args.seed, args.out, workers=args.workers
            )
        return cmd_compare(args.samples, args.fit, args.out)
    except (SchemaError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
