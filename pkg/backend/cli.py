# backend/cli.py

import sys
import logging
import argparse
import os
import traceback

from backend.config import LOG_FILE, OUTPUT_DIR, setup_logging
from backend.errors import ConfigurationError, ValidationError
from backend.scenarios import SCENARIOS, build_config, list_scenarios, run_scenario
from benchmarking.fitting import clifford_fidelity, fit_gaussian_decay, fit_rb
from data.io import dumps, load_config, read_csv, save_json, to_plain

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

TIME_COLUMNS = {"t_us": 1.0, "t_ns": 1e-3}
SIGNAL_COLUMNS = ("P", "P_parallel", "y")


def build_parser():
    parser = argparse.ArgumentParser(prog="qsim", description="Conveyor spin-qubit simulation scenarios")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write its outputs")
    run.add_argument("scenario", choices=sorted(SCENARIOS))
    run.add_argument("--config", default=None, help="YAML scenario config (defaults when omitted)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default=OUTPUT_DIR, help="output directory")

    fit = sub.add_parser("fit", help="fit a decay table")
    fit.add_argument("kind", choices=["rb", "decay"])
    fit.add_argument("--in", dest="input", required=True, help="CSV input")
    fit.add_argument("--out", default=None, help="JSON report path")

    validate = sub.add_parser("validate", help="validate a scenario config")
    validate.add_argument("--config", required=True)
    validate.add_argument("--scenario", default=None, help="needed when the file has no scenario key")

    sub.add_parser("list", help="list the available scenarios")
    return parser


def _groups(df, columns):
    key = next((c for c in columns if c in df.columns), None)
    if key is None:
        return [("all", df)]
    return [(str(k), g) for k, g in df.groupby(key, sort=True)]


def fit_rb_table(df):
    """RB fits per run or curve of a decay table (L, mean, stderr)."""
    fits = {}
    for label, group in _groups(df, ("curve", "run")):
        fit = fit_rb(group)
        fits[label] = {"p": fit["p"], "p_stderr": fit["stderr"]["p"], "A": fit["A"], "B": fit["B"],
                       "F_C": clifford_fidelity(fit["p"]), "degenerate": fit["degenerate"]}
    return {"kind": "rb", "fits": fits}


def fit_decay_table(df):
    """Gaussian-decay fits of Ramsey, echo or DCPhase traces, one per cycle when `c` is present."""
    time_col = next((c for c in TIME_COLUMNS if c in df.columns), None)
    signal_col = next((c for c in SIGNAL_COLUMNS if c in df.columns), None)
    if time_col is None or signal_col is None:
        raise ValidationError("Decay table needs a time and a signal column",
                              [f"time: one of {list(TIME_COLUMNS)}", f"signal: one of {list(SIGNAL_COLUMNS)}"])
    fits = {}
    for label, group in _groups(df, ("c",)):
        t_us = group[time_col].to_numpy(dtype=float) * TIME_COLUMNS[time_col]
        fits[label] = fit_gaussian_decay(t_us, group[signal_col].to_numpy(dtype=float))
    return {"kind": "decay", "time_unit": "us", "fits": fits}


def _scenario_of(config_path, scenario):
    if scenario:
        return scenario
    declared = load_config(config_path).get("scenario")
    if not declared:
        raise ConfigurationError("Config has no scenario key; pass --scenario")
    return declared


def _print_summary(result):
    print(f"\n{'=' * 60}")
    print(f"Scenario: {result['scenario']} (seed {result['seed']})")
    print(f"Output: {result['out_dir']}")
    for name in result["files"]:
        print(f"   {name}")
    print(f"{'=' * 60}\n")


def dispatch(args):
    if getattr(args, "config", None):
        args.config = os.path.abspath(args.config)
    if args.command == "list":
        for s in list_scenarios():
            print(f"{s['name']:<20} {s['description']}")
        return EXIT_OK

    if args.command == "run":
        result = run_scenario(args.scenario, args.config, args.seed, args.out)
        _print_summary(result)
        return EXIT_OK

    if args.command == "validate":
        name = _scenario_of(args.config, args.scenario)
        build_config(name, args.config)
        logging.info(f"Config valid: scenario={name} | path={args.config}")
        print(f"{args.config}: valid {name} config")
        return EXIT_OK

    df = read_csv(os.path.abspath(args.input))
    report = fit_rb_table(df) if args.kind == "rb" else fit_decay_table(df)
    if args.out:
        save_json(report, args.out)
    print(dumps(to_plain(report)))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        return dispatch(args)
    except (ValueError, FileNotFoundError) as e:
        logging.error(f"{args.command} failed: {e}")
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeError as e:
        logging.error(f"{args.command} failed: {e}")
        logging.error(traceback.format_exc())
        print(f"ERROR: {e}", file=sys.stderr)
        print(f"See {LOG_FILE} for details", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
