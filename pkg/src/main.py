#!/usr/bin/env python3
"""
Paramorphism Lab - experiment runner and braid utilities

Usage:
    python src/main.py run --experiment p2 --flow eggbeater --qm cross-linking --n 4 --k 1..20 --samples 5000 --seed 7
    python src/main.py run --experiment length --flow rotation --angle 1.0
    python src/main.py run --config config/experiments/eggbeater_growth.json --workers 4
    python src/main.py braid invariants "s1 s1 s1"
    python src/main.py braid compose "s1" "s1^-1"
    python src/main.py braid extract --flow rotation --angle 2.0 --n 4 --seed 3

Exit codes: 0 every property passed, 1 a property failed, 2 invalid configuration,
3 numerical failure (the error is embedded in report.json).
"""

import argparse
import json
import logging
import os
import sys

# Add src directory to path
current_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, current_dir)

from core.braids import (  # noqa: E402
    braid_compose, braid_invariants, extract_braid_with_retry, format_braid, format_braid_json, parse_braid,
    parse_braid_json,
)
from core.config_manager import ConfigManager, ExperimentConfig, load_config_file, resolve_config  # noqa: E402
from core.errors import (  # noqa: E402
    CollarTooWide, ConfigInvalid, LayoutInfeasible, ParamorphismError, ParseError, StepSizeInvalid,
)
from core.experiments import run_experiment  # noqa: E402
from core.presets import build_flow  # noqa: E402
from core.quasimorphisms import build_quasimorphism  # noqa: E402
from core.report_engine import ReportTemplateEngine  # noqa: E402
from core.run_ledger import RunLedger  # noqa: E402
from core.sphere_geometry import Configuration, base_configuration, make_rng, sample_configuration  # noqa: E402
from utils.logger import setup_logger  # noqa: E402

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# Errors caused by the requested setup rather than by the numerics
CONFIG_ERRORS = (ConfigInvalid, ParseError, LayoutInfeasible, CollarTooWide, StepSizeInvalid)


def parse_value(text: str):
    """JSON value when it parses ('2', '[1, 2]', 'true'), otherwise the raw string"""
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_params(items):
    params = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigInvalid(f"Parameter '{item}' must look like key=value")
        key, value = item.split("=", 1)
        params[key.strip()] = parse_value(value.strip())
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Paramorphism experiments on the two-sphere.")
    parser.add_argument("--config-dir", default="config", help="Directory with config.json and experiment profiles")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one experiment and write report.json / points.csv")
    run.add_argument("--config", help="Flat JSON experiment file")
    run.add_argument("--profile", help="Named profile from <config-dir>/experiments")
    run.add_argument("--experiment", help="p1, p2, p3, p4, length, frag, nondeg, cocycle, ishida, d1, ...")
    run.add_argument("--flow", help="Flow preset name")
    run.add_argument("--qm", help="Quasimorphism name")
    run.add_argument("--n", type=int, help="Number of configuration points (n > 3)")
    run.add_argument("--samples", type=int, help="Monte Carlo samples per estimate")
    run.add_argument("--k", dest="k_range", help="Iterates, e.g. 1..20 or 1,2,5")
    run.add_argument("--seed", type=int, help="Master seed (default from PARAMORPHISM_SEED, else 0)")
    run.add_argument("--workers", type=int, help="Worker processes; never changes results")
    run.add_argument("--out", help="Output directory")
    run.add_argument("--step-size", type=float, dest="step_size", help="Integrator step size")
    run.add_argument("--angle", type=float, help="Shortcut for --param angle=VALUE")
    run.add_argument("--param", action="append", help="Flow parameter key=value (repeatable)")
    run.add_argument("--qm-param", action="append", dest="qm_param", help="Quasimorphism parameter key=value")

    braid = sub.add_parser("braid", help="Braid word utilities")
    braid_sub = braid.add_subparsers(dest="braid_command", required=True)

    inv = braid_sub.add_parser("invariants", help="Permutation, exponent sum, lk_ij and signature of a word")
    inv.add_argument("word", help="'s1 s2^-1' or a JSON array of [index, sign] pairs")
    inv.add_argument("--n", type=int, help="Strand count (default: largest index + 1)")
    inv.add_argument("--json", action="store_true", help="Print JSON")

    comp = braid_sub.add_parser("compose", help="Word of A o B (B runs first), freely reduced")
    comp.add_argument("first", help="Word A")
    comp.add_argument("second", help="Word B")
    comp.add_argument("--n", type=int, help="Strand count (default: enough for both words)")
    comp.add_argument("--json", action="store_true", help="Print JSON")

    ext = braid_sub.add_parser("extract", help="Braid of a flow on a configuration")
    ext.add_argument("--flow", default="rotation", help="Flow preset name")
    ext.add_argument("--angle", type=float, help="Shortcut for --param angle=VALUE")
    ext.add_argument("--param", action="append", help="Flow parameter key=value (repeatable)")
    ext.add_argument("--points", help="JSON list of [x, y, z] points (default: random configuration)")
    ext.add_argument("--n", type=int, default=4, help="Points in the random configuration")
    ext.add_argument("--seed", type=int, default=0, help="Seed of the random configuration")
    ext.add_argument("--step-size", type=float, default=0.01, dest="step_size")
    ext.add_argument("--json", action="store_true", help="Print JSON")
    return parser


def config_from_args(args) -> ExperimentConfig:
    file_data = {}
    if args.profile:
        try:
            file_data.update(ConfigManager(args.config_dir).get_experiment_config(args.profile))
        except ValueError as e:
            raise ConfigInvalid(str(e)) from e
    if args.config:
        file_data.update(load_config_file(args.config))
    flow_params = parse_params(args.param)
    if args.angle is not None:
        flow_params["angle"] = args.angle
    overrides = {
        "experiment": args.experiment,
        "flow": args.flow,
        "qm": args.qm,
        "n": args.n,
        "samples": args.samples,
        "k_range": args.k_range,
        "seed": args.seed,
        "workers": args.workers,
        "out": args.out,
        "step_size": args.step_size,
        "flow_params": flow_params or None,
        "qm_params": parse_params(args.qm_param) or None,
    }
    return resolve_config(file_data, overrides)


def cmd_run(args, config_manager: ConfigManager, logger: logging.Logger) -> int:
    try:
        config = config_from_args(args)
        qm = build_quasimorphism(config.qm, config.n, config.qm_params)
    except ConfigInvalid as e:
        print(f"[ERROR] {e.message}")
        return EXIT_CONFIG

    config_hash = config.config_hash()
    print(f"[INFO] Experiment {config.experiment} (config {config_hash[:12]}, seed {config.seed})")

    reports, error = [], None
    try:
        _, reports = run_experiment(config, qm)
    except CONFIG_ERRORS as e:
        print(f"[ERROR] {type(e).__name__}: {e.message}")
        return EXIT_CONFIG
    except ParamorphismError as e:
        logger.error("Experiment failed: %s", e.message)
        error = e.to_dict()

    engine = ReportTemplateEngine(config_manager.get_template_dir())
    run = engine.build_run(config.experiment, config.to_dict(), config_hash, qm.manifest(),
                           [r.to_dict() for r in reports], error)
    report_path = engine.write_report_json(os.path.join(config.out, "report.json"), run)
    engine.write_points_csv(os.path.join(config.out, "points.csv"), run)

    for line in engine.summary_lines(run):
        print(line)
    for report in reports:
        if report.property_id == "Length":
            print(f"[INFO] L{report.constants['p']:g} length: {report.constants['length']:.10f}")

    if error is not None:
        print(f"[ERROR] {error['error']}: {error['message']}")
        exit_code = EXIT_NUMERICAL
    else:
        exit_code = EXIT_PASS if run["pass"] else EXIT_FAIL

    try:
        RunLedger(config_manager.get_ledger_path()).record_run(run, exit_code, os.path.abspath(report_path))
    except Exception as e:
        logger.warning("Could not record run in ledger: %s", e)

    if exit_code == EXIT_PASS:
        print(f"[SUCCESS] Report written to {report_path}")
    else:
        print(f"[INFO] Report written to {report_path}")
    return exit_code


def read_word(text: str, n=None):
    stripped = text.strip()
    if stripped.startswith("[") or stripped.startswith("{"):
        return parse_braid_json(stripped, n)
    return parse_braid(stripped, n)


def print_word(word, as_json: bool):
    print(json.dumps(word.to_dict()) if as_json else format_braid(word))


def cmd_braid(args) -> int:
    try:
        if args.braid_command == "invariants":
            word = read_word(args.word, args.n)
            table = braid_invariants(word)
            if args.json:
                print(json.dumps(table, sort_keys=True))
            else:
                for key, value in table.items():
                    print(f"{key}: {value}")
        elif args.braid_command == "compose":
            n = args.n
            if n is None:
                n = max(read_word(args.first).n, read_word(args.second).n)
            word = braid_compose(read_word(args.first, n), read_word(args.second, n))
            print_word(word, args.json)
        else:
            params = parse_params(args.param)
            if args.angle is not None:
                params["angle"] = args.angle
            flow = build_flow(args.flow, params, args.step_size)
            if args.points:
                x = Configuration(parse_value(args.points))
            else:
                x = sample_configuration(make_rng(args.seed, 1), args.n)
            z = base_configuration(x.n, x.n // 2)
            word = extract_braid_with_retry(flow, x, z, seed=args.seed)
            if args.json:
                print(format_braid_json(word))
            else:
                print(format_braid(word))
    except CONFIG_ERRORS as e:
        print(f"[ERROR] {type(e).__name__}: {e.message}")
        return EXIT_CONFIG
    except (ValueError, TypeError) as e:
        print(f"[ERROR] {e}")
        return EXIT_CONFIG
    except ParamorphismError as e:
        print(f"[ERROR] {type(e).__name__}: {e.message}")
        return EXIT_NUMERICAL
    return EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    config_manager = ConfigManager(args.config_dir)
    log_config = config_manager.get_log_config()
    logger = setup_logger("paramorphism", log_file=log_config["file"], level=args.log_level or log_config["level"])
    # Library modules log under core.*; route them through the same handlers
    core_logger = setup_logger("core", log_file=log_config["file"], level=args.log_level or log_config["level"])
    core_logger.propagate = False

    if args.command == "run":
        return cmd_run(args, config_manager, logger)
    return cmd_braid(args)


if __name__ == "__main__":
    sys.exit(main())
