"""Command-line surface.

    poisson-chaos coeffs   --config cfg.json   -> coeffs.json, coeffs.csv
    poisson-chaos variance --config cfg.json   -> brackets.csv
    poisson-chaos verify   --config cfg.json   -> verify.json (exit 3 on failure)
    poisson-chaos sample   --config cfg.json   -> samples.jsonl

Without --config the built-in default experiment runs.  Exit codes: 0 ok,
1 internal error, 2 config error, 3 verification failure.  All floats are
printed with 17 significant digits; reruns with the same config and seed are
byte-identical up to the timestamp header lines.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from dataclasses import replace
from pathlib import Path

from . import verify as verify_mod
from .bounds import alternating_bracket, truncated_bounds
from .chaos import chaos_coefficients, coefficients_to_csv_rows, coefficients_to_json_dict
from .config import ExperimentConfig
from .errors import ConfigError
from .mc import sample_poisson
from .reporting import fmt, json_dumps, timestamp, write_csv, write_json

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.default()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, outputs=args.out)
    return config


def _out_dir(config: ExperimentConfig) -> Path:
    path = Path(config.outputs)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_coeffs(config: ExperimentConfig, quiet: bool) -> int:
    out = _out_dir(config)
    intensity = config.finite_intensity()
    policy = config.policy()
    k = intensity.k
    by_name = {}
    csv_rows: list[list] = []
    for name, f in config.functional_objects().items():
        cc = chaos_coefficients(f, intensity, config.n_max, policy)
        by_name[name] = coefficients_to_json_dict(cc)
        rows = coefficients_to_csv_rows(cc)
        # a functional with no chaos content at all reports just its mean
        if all(abs(v[-1]) <= 1e-12 * max(1.0, abs(cc.mean)) for v in rows[1:]):
            rows = rows[:1]
        for row in rows:
            csv_rows.append([name, *row])
    write_json(out / "coeffs.json", {
        "generated_at": timestamp(),
        "intensity": list(config.intensity),
        "n_max": config.n_max,
        "functionals": by_name,
    })
    header = ["functional", "order", *[f"m{i+1}" for i in range(k)], "value"]
    write_csv(out / "coeffs.csv", header, csv_rows)
    if not quiet:
        print(f"wrote {out / 'coeffs.json'} and {out / 'coeffs.csv'}")
    return EXIT_OK


def cmd_variance(config: ExperimentConfig, quiet: bool) -> int:
    out = _out_dir(config)
    intensity = config.finite_intensity()
    policy = config.policy()
    rows: list[list] = []
    for name, f in config.functional_objects().items():
        for k in range(1, config.k + 1):
            for method, bracket in (
                ("alternating", alternating_bracket(f, intensity, k, policy)),
                ("truncated", truncated_bounds(f, intensity, k, policy)),
            ):
                rows.append([
                    name, method, bracket.k,
                    bracket.lower, bracket.variance, bracket.upper,
                    bracket.lower_tight, bracket.upper_tight,
                ])
    header = ["functional", "method", "k", "lower", "variance", "upper", "lower_tight", "upper_tight"]
    write_csv(out / "brackets.csv", header, rows)
    if not quiet:
        print(f"wrote {out / 'brackets.csv'}")
    return EXIT_OK


def cmd_verify(config: ExperimentConfig, quiet: bool) -> int:
    out = _out_dir(config)
    checks = verify_mod.run_suite(config)
    all_pass = all(c.passed for c in checks)
    report = {
        "generated_at": timestamp(),
        "seed": config.seed,
        "n_samples": config.n_samples,
        "z_threshold": config.z_threshold,
        "note": "mc checks pass at |z| <= z_threshold; suite false-alarm rate < 1% at the default threshold",
        "intensity": list(config.intensity),
        "checks": [c.as_dict() for c in checks],
        "all_pass": all_pass,
    }
    write_json(out / "verify.json", report)
    if not quiet:
        for c in checks:
            status = "pass" if c.passed else "FAIL"
            print(f"{status}  {c.name}  [{c.method}]  discrepancy={fmt(c.discrepancy)} tolerance={fmt(c.tolerance)}")
        print(f"report: {out / 'verify.json'}")
    return EXIT_OK if all_pass else EXIT_VERIFY


def cmd_sample(config: ExperimentConfig, quiet: bool) -> int:
    out = _out_dir(config)
    batch = sample_poisson(config.finite_intensity(), config.seed, config.n_samples, config.marked)
    path = out / "samples.jsonl"
    with path.open("w") as fh:
        for rec in batch.jsonl_records():
            fh.write(_compact_json(rec) + "\n")
    if not quiet:
        print(f"wrote {path} ({batch.n_samples} configurations)")
    return EXIT_OK


def _compact_json(rec: dict) -> str:
    parts = []
    for key, value in rec.items():
        if key == "counts":
            parts.append(f'"counts": [{", ".join(str(int(x)) for x in value)}]')
        else:
            site_lists = ", ".join("[" + ", ".join(fmt(float(m)) for m in site) + "]" for site in value)
            parts.append(f'"marks": [{site_lists}]')
    return "{" + ", ".join(parts) + "}"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="poisson-chaos",
        description="Chaos-expansion calculus for Poisson processes on finite ground spaces",
    )
    parser.add_argument("--config", metavar="PATH", help="experiment config JSON (default: built-in)")
    parser.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, metavar="N", help="seed override")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", help="chaos coefficients to coeffs.{json,csv}")
    sub.add_parser("variance", help="variance bracket tables to brackets.csv")
    sub.add_parser("verify", help="run the identity suite, write verify.json")
    sub.add_parser("sample", help="write seeded configurations to samples.jsonl")
    args = parser.parse_args(argv)

    try:
        config = _load_config(args)
        command = {
            "coeffs": cmd_coeffs,
            "variance": cmd_variance,
            "verify": cmd_verify,
            "sample": cmd_sample,
        }[args.command]
        return command(config, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
