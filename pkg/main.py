import argparse
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional

import orjson

from beamformer_opt import evaluate_beamformer, isotropic_baseline
from errors import ConfigError, InfeasibleScenarioError, NfisacError
from logging_config import configure_logging, get_logger
from models import MethodEnum, SweepConfig
from sweep_harness import (
    SweepPoint,
    expand_points,
    format_csv,
    load_config,
    optimise_point,
    parse_config,
    run_sweep,
)
from validation_suite import validate

# Configure logging first
configure_logging()
logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4

OPTIMISER_METHODS = (MethodEnum.CLOSED_FORM, MethodEnum.VQF, MethodEnum.ORACLE)


def _point_header(point: SweepPoint) -> Dict:
    return {
        "index": point.index,
        "sweep_value": point.value,
        "rho": point.target.rho,
        "phi_deg": math.degrees(point.target.phi),
        "y": point.target.y,
        "n_t": point.layout_t.count,
        "n_r": point.layout_r.count,
        "inside_circle": point.inside_circle,
        "near_field": point.near_field,
    }


def crb_command(config: SweepConfig) -> List[Dict]:
    """Isotropic numeric FIM report, with closed forms, for every point of the config"""
    documents = []
    for point in expand_points(config):
        report = isotropic_baseline(point.scenario, point.layout_t, point.layout_r, point.target)
        documents.append({**_point_header(point), **report.to_dict()})
    return documents


def optimize_command(config: SweepConfig) -> List[Dict]:
    """Run each configured optimiser at every point; infeasible points abort the run"""
    methods = [m for m in config.methods if m in OPTIMISER_METHODS] or [MethodEnum.VQF]
    documents = []
    for point in expand_points(config):
        for method in methods:
            result = optimise_point(method, config, point)
            evaluate_beamformer(result, point.scenario, point.layout_t, point.layout_r, point.target)
            documents.append({
                **_point_header(point),
                "method": method.value,
                "termination": result.termination.value,
                "iterations": result.iterations,
                "surrogate_objective": result.objective,
                "objective_trace": result.objective_trace,
                "candidate_values": result.candidate_values,
                "speb": result.speb,
                "crbs": result.crbs,
                "sinr_slack": result.sinr_slack,
                "power_slack": result.power_slack,
                "fixed_point_residual": result.fixed_point_residual,
                "w_real": result.w.real.tolist(),
                "w_imag": result.w.imag.tolist(),
            })
    return documents


def _emit_json(documents: List[Dict], out: Optional[str]) -> None:
    payload = orjson.dumps(documents, option=orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_INDENT_2)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload + b"\n")
        logger.info("report_written", path=str(path), entries=len(documents))
    else:
        sys.stdout.write(payload.decode() + "\n")


def _load(args) -> SweepConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = parse_config({**config.model_dump(), "seed": args.seed})
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfisac",
        description="Near-field ISAC bounds and beamformer design for circular arrays",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("crb", "Isotropic CRB/SPEB report for every point of a config"),
        ("optimize", "Optimise the transmit beamformer for every point of a config"),
        ("sweep", "Evaluate a parameter sweep and write a CSV table"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="Path to a JSON sweep config")
        cmd.add_argument("--seed", type=int, default=None, help="Override the config seed")
        cmd.add_argument("--out", default=None, help="Output path (JSON for crb/optimize, CSV for sweep)")
        cmd.add_argument("--format", choices=["csv"], default="csv", help="Table format")

    val = sub.add_parser("validate", help="Run the built-in property checks")
    val.add_argument("--filter", default=None, help="Group name or substring of a check name")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        if args.command == "validate":
            report = validate(args.filter)
            print(report.render())
            return EXIT_OK if report.passed else EXIT_VALIDATION

        config = _load(args)
        if args.command == "crb":
            _emit_json(crb_command(config), args.out)
        elif args.command == "optimize":
            _emit_json(optimize_command(config), args.out)
        else:
            rows = run_sweep(config, output=args.out)
            if not (args.out or config.output):
                sys.stdout.write(format_csv(rows))
        return EXIT_OK

    except ConfigError as e:
        logger.error("invalid_config", error=str(e), field_path=e.field_path)
        print(f"❌ Invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScenarioError as e:
        logger.error("infeasible_scenario", error=str(e))
        print(f"❌ Infeasible scenario: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NfisacError as e:
        logger.error("run_failed", error=str(e), error_type=type(e).__name__)
        print(f"❌ Run failed, {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
