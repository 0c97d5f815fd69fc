"""Experiment driver: scenario oracles, fast and traditional system runs,
Monte Carlo sweeps and cross-system comparison tables.

Every run writes a manifest.json (command, inputs, seed, tool version)
alongside its outputs; rerunning a command with the same manifest inputs
reproduces the CSV outputs byte for byte. Options may also be supplied via
--config JSON (explicit command-line flags take precedence over the file,
which takes precedence over built-in defaults).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, pipeline, pwe, sources, traditional, uncertainty
from .fields import save_field_grid

DEFAULT_DELTAS = [0.0, 0.01, 0.02, 0.03]
DEFAULT_METHODS = ["linear", "cubic_spline"]


@dataclass
class RunManifest:
    command: str
    cases: list[int]
    deltas: list[float]
    methods: list[str]
    seed: int
    trials: int
    resolution: float
    output_dir: str
    tool_version: str
    timestamp: str

    def write(self, out_dir: Path) -> None:
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def _manifest(command: str, opts: dict, out_dir: Path) -> RunManifest:
    return RunManifest(
        command=command,
        cases=list(opts.get("cases") or []),
        deltas=list(opts.get("deltas") or []),
        methods=list(opts.get("methods") or []),
        seed=opts.get("seed", 0),
        trials=opts.get("trials", 0),
        resolution=opts.get("resolution", 0.0),
        output_dir=str(out_dir),
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def cmd_oracle(opts: dict) -> int:
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for case in opts["cases"]:
        scenario = sources.build_case(case, seed=opts["seed"])
        cache = out / f"oracle_case{case:02d}_seed{opts['seed']}"
        if not cache.with_suffix(".bin").exists():
            grid_spec = pipeline.standard_volume_spec(scenario.geometry, opts["resolution"])
            grid = sources.scenario_field_volume(scenario, grid_spec)
            save_field_grid(grid, cache)
        sources.save_scenario(scenario, out / f"scenario_case{case:02d}_seed{opts['seed']}.json")
        rows.append(
            [case, opts["seed"], 1.0, float(scenario.reference_10g), scenario.amplitude_scale]
        )
    _write_csv(
        out / "references.csv",
        ["case", "seed", "sar_1g_reference", "sar_10g_reference", "amplitude_scale"],
        rows,
    )
    _manifest("oracle", opts, out).write(out)
    return 0


def cmd_fast(opts: dict) -> int:
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    for d in opts["deltas"]:
        if not 0.0 <= d <= 1.0:
            raise SystemExit(f"delta must lie in [0, 1], got {d}")
    rows = []
    for case in opts["cases"]:
        scenario = sources.build_case(case, seed=opts["seed"])
        samples = sources.ideal_measurement(scenario)
        spectrum = pwe.forward_spectrum(samples)
        pwe.dump_spectrum_csv(
            spectrum, out / f"spectrum_case{case:02d}.csv", components=("x", "y")
        )
        for delta in opts["deltas"]:
            est1, est10 = pipeline.fast_system_estimate(scenario, delta, samples=samples)
            rows.append(
                [
                    case,
                    float(delta),
                    est1.value,
                    est10.value,
                    1.0,
                    float(scenario.reference_10g),
                ]
            )
    _write_csv(
        out / "estimates.csv",
        ["case", "delta", "sar_1g", "sar_10g", "sar_1g_reference", "sar_10g_reference"],
        rows,
    )
    _manifest("fast", opts, out).write(out)
    return 0


def cmd_traditional(opts: dict) -> int:
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    for method in opts["methods"]:
        if method not in ("linear", "cubic_spline"):
            raise SystemExit(f"unknown interpolation method {method!r}")
    rows = []
    for case in opts["cases"]:
        scenario = sources.build_case(case, seed=opts["seed"])
        if opts.get("dump_scans"):
            config = traditional.scan_config(scenario.medium)
            scan, _ = traditional.area_scan(scenario, config)
            traditional.scan_result_to_csv(scan, out / f"area_scan_case{case:02d}.csv")
        for method in opts["methods"]:
            est1, est10 = traditional.traditional_estimate(scenario, method)
            rows.append(
                [case, method, est1.value, est10.value, 1.0, float(scenario.reference_10g)]
            )
    _write_csv(
        out / "estimates.csv",
        ["case", "method", "sar_1g", "sar_10g", "sar_1g_reference", "sar_10g_reference"],
        rows,
    )
    _manifest("traditional", opts, out).write(out)
    return 0


def _load_perturbation_spec(path: str | None) -> uncertainty.PerturbationSpec:
    if path is None:
        return uncertainty.PerturbationSpec()
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kwargs = {}
    for key in (
        "probe_position_halfwidth",
        "eps_rel_halfwidth",
        "sigma_rel_halfwidth",
        "coupling_db_halfwidth",
        "amplitude_noise_sd",
        "phase_noise_sd",
    ):
        if key in doc:
            kwargs[key] = float(doc[key])
    if "enabled_factors" in doc:
        kwargs["enabled_factors"] = frozenset(doc["enabled_factors"])
    return uncertainty.PerturbationSpec(**kwargs)


def cmd_montecarlo(opts: dict) -> int:
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    cases = opts["cases"]
    if len(cases) != 1:
        raise SystemExit("montecarlo runs one case at a time")
    scenario = sources.build_case(cases[0], seed=opts["seed"])
    spec = _load_perturbation_spec(opts.get("spec_file"))
    summaries = uncertainty.factor_sweep(
        scenario,
        spec,
        trials=opts["trials"],
        deltas=[float(d) for d in opts["deltas"]],
        mass=1.0,
        seed=opts["seed"],
    )
    for s in summaries:
        name = f"mc_case{cases[0]:02d}_{s.factor_label}_delta{s.delta:g}.csv"
        uncertainty.export_mc_csv(s, out / name)
    uncertainty.export_mc_summary_json(summaries, out / "mc_summary.json")
    _manifest("montecarlo", opts, out).write(out)
    return 0


def cmd_compare(opts: dict) -> int:
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    missing = []
    oracle_csv = Path(opts["oracle_dir"]) / "references.csv" if opts.get("oracle_dir") else None
    fast_csv = Path(opts["fast_dir"]) / "estimates.csv" if opts.get("fast_dir") else None
    trad_csv = (
        Path(opts["traditional_dir"]) / "estimates.csv" if opts.get("traditional_dir") else None
    )
    for label, path, flag in (
        ("oracle references", oracle_csv, "--oracle-dir (run `sarbench oracle` first)"),
        ("fast estimates", fast_csv, "--fast-dir (run `sarbench fast` first)"),
        ("traditional estimates", trad_csv, "--traditional-dir (run `sarbench traditional` first)"),
    ):
        if path is None or not path.exists():
            missing.append(f"{label}: missing; provide {flag}")
    if missing:
        raise SystemExit("cannot compare:\n  " + "\n  ".join(missing))

    def read_rows(path):
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))

    refs = {int(r["case"]): r for r in read_rows(oracle_csv)}
    rows = []
    for r in read_rows(fast_csv):
        case = int(r["case"])
        if case not in refs or case not in opts["cases"]:
            continue
        ref10 = float(refs[case]["sar_10g_reference"])
        rows.append(
            [
                case,
                f"fast_delta{float(r['delta']):g}",
                float(r["sar_1g"]),
                float(r["sar_10g"]),
                (float(r["sar_1g"]) - 1.0) / 1.0,
                (float(r["sar_10g"]) - ref10) / ref10,
            ]
        )
    for r in read_rows(trad_csv):
        case = int(r["case"])
        if case not in refs or case not in opts["cases"]:
            continue
        ref10 = float(refs[case]["sar_10g_reference"])
        rows.append(
            [
                case,
                f"traditional_{r['method']}",
                float(r["sar_1g"]),
                float(r["sar_10g"]),
                (float(r["sar_1g"]) - 1.0) / 1.0,
                (float(r["sar_10g"]) - ref10) / ref10,
            ]
        )
    rows.sort(key=lambda row: (row[0], row[1]))
    _write_csv(
        out / "compare.csv",
        ["case", "system", "sar_1g", "sar_10g", "rel_err_1g", "rel_err_10g"],
        rows,
    )
    _manifest("compare", opts, out).write(out)
    return 0


def _parse_cases(text: str) -> list[int]:
    cases = [int(tok) for tok in text.split(",") if tok]
    for c in cases:
        if c not in sources.CASE_MEDIA:
            raise argparse.ArgumentTypeError(f"unknown case index {c}")
    return cases


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def _parse_methods(text: str) -> list[str]:
    return [tok for tok in text.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarbench",
        description="SAR measuring-system simulation workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_resolution=False):
        p.add_argument("--cases", type=_parse_cases, help="comma-separated case indices (1..11)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", type=str, help="output directory")
        p.add_argument("--config", type=str, help="JSON file with option defaults")
        if needs_resolution:
            p.add_argument("--resolution", type=float, help="grid resolution in m (default 1e-3)")

    p = sub.add_parser("oracle", help="fine-grid reference fields and peak SAR per case")
    common(p, needs_resolution=True)

    p = sub.add_parser("fast", help="probe-array system estimates over a delta list")
    common(p)
    p.add_argument("--delta", dest="deltas", type=_parse_floats, help="comma-separated deltas")

    p = sub.add_parser("traditional", help="single-probe system estimates")
    common(p)
    p.add_argument("--method", dest="methods", type=_parse_methods, help="linear,cubic_spline")
    p.add_argument("--dump-scans", action="store_true", default=None, help="export area scans")

    p = sub.add_parser("montecarlo", help="Monte Carlo factor sweep for one case")
    common(p)
    p.add_argument("--delta", dest="deltas", type=_parse_floats, help="comma-separated deltas")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per run (default 500)")
    p.add_argument("--spec-file", type=str, help="JSON perturbation-spec overrides")

    p = sub.add_parser("compare", help="merge oracle/fast/traditional results")
    common(p)
    p.add_argument("--oracle-dir", type=str, help="directory of a previous oracle run")
    p.add_argument("--fast-dir", type=str, help="directory of a previous fast run")
    p.add_argument("--traditional-dir", type=str, help="directory of a previous traditional run")
    return parser


_DEFAULTS = {
    "cases": list(range(1, 12)),
    "deltas": DEFAULT_DELTAS,
    "methods": DEFAULT_METHODS,
    "seed": 0,
    "trials": 500,
    "resolution": 1e-3,
}


def _merge_options(args: argparse.Namespace) -> dict:
    opts = dict(_DEFAULTS)
    opts["out"] = f"runs/{args.command}"
    config_path = getattr(args, "config", None)
    if config_path:
        opts.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            opts[key] = value
    return opts


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    opts = _merge_options(args)
    handlers = {
        "oracle": cmd_oracle,
        "fast": cmd_fast,
        "traditional": cmd_traditional,
        "montecarlo": cmd_montecarlo,
        "compare": cmd_compare,
    }
    return handlers[args.command](opts)


if __name__ == "__main__":
    sys.exit(main())
