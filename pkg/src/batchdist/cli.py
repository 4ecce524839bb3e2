"""Command-line interface: ``batchdist {validate,simulate,batch,calibrate,compare}``.

Machine-readable results go to stdout as JSON; diagnostics go to stderr.
Exit codes: 0 success, 1 validation failure or bad usage, 2 solver failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from .errors import (
    BatchDistError,
    CalibrationError,
    ComparisonError,
    ConfigurationError,
    ConvergenceError,
    InvalidInputError,
    OutputError,
    ParseError,
    StateViolationError,
    StepSizeError,
    ValidationError,
)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("batchdist")

_IO_ERRORS = ("OutputError", "LayoutCollisionError", "OSError", "PermissionError",
              "FileNotFoundError", "FileExistsError")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def bundled_data(name) -> Path:
    return Path(str(resources.files("batchdist") / "data" / name))


def exit_code_for(exc) -> int:
    if isinstance(exc, (OutputError, OSError)):
        return EXIT_IO
    if isinstance(exc, (ConvergenceError, StateViolationError, StepSizeError, CalibrationError)):
        return EXIT_SOLVER
    if isinstance(exc, (ParseError, ValidationError, ConfigurationError, InvalidInputError,
                        ComparisonError, UsageError)):
        return EXIT_VALIDATION
    return EXIT_SOLVER if isinstance(exc, BatchDistError) else EXIT_IO


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _existing(path, what):
    p = Path(path)
    if not p.exists():
        raise OutputError(f"{what} not found", p)
    return p


def _property_path(args, plant_path: Path) -> Path:
    if args.property_config:
        return _existing(args.property_config, "property config")
    import xml.etree.ElementTree as ET

    try:
        ref = ET.parse(plant_path).getroot().attrib.get("property_file", "")
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}", str(plant_path)) from exc
    if ref:
        for cand in (plant_path.parent / ref, bundled_data(Path(ref).name)):
            if cand.exists():
                return cand
        raise OutputError("property file named in the plant config not found", plant_path.parent / ref)
    raise InvalidInputError("no --property-config given and the plant config names no property_file")


def _load(args, strict=True):
    from .workflow.config import load_config

    plant_path = _existing(args.plant_config, "plant config")
    return load_config(plant_path, _property_path(args, plant_path), strict=strict)


def _overrides(args, scenario):
    integ = scenario.integrator
    if getattr(args, "sample_interval", None) is not None:
        integ = dataclasses.replace(integ, sample_interval=args.sample_interval)
    sc = dataclasses.replace(scenario, integrator=integ)
    if getattr(args, "horizon", None) is not None:
        sc = dataclasses.replace(sc, horizon=args.horizon)
    return sc


def _select(bundle, sid):
    for sc in bundle.scenarios:
        if sc.id == sid:
            return sc
    if sid in bundle.issues:
        raise ValidationError(f"scenario {sid!r} is invalid: {bundle.issues[sid]}")
    raise ValidationError(f"unknown scenario {sid!r}")


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args):
    bundle = _load(args, strict=False)
    ok = True
    for sc in bundle.scenarios:
        _emit(dict(scenario=sc.id, valid=True, perturbations=len(sc.controls.perturbations),
                   rejected_anomalies=[dict(id=a, reason=r) for a, r in sc.controls.rejected]))
    for sid, issue in bundle.issues.items():
        ok = False
        _emit(dict(scenario=sid, valid=False, issue=issue))
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_simulate(args):
    from .integrator import StopReason, simulate
    from .workflow.batch import _conservation_defect
    from .workflow.dataset import emit_dataset_layout
    from .workflow.timeseries import write_timeseries

    bundle = _load(args, strict=False)
    sc = _overrides(args, _select(bundle, args.scenario_id))
    result = simulate(sc)
    emit_dataset_layout(args.out, sc, force=args.force)
    path = write_timeseries(result, sc, args.out)
    _emit(dict(scenario=sc.id, stop_reason=result.stop_reason.value, t_final=result.records[-1].t,
               n_records=len(result.records), conservation_defect=_conservation_defect(result.records),
               csv=str(path), message=result.message))
    if result.stop_reason is StopReason.SOLVER_FAILURE:
        log.error("solver failure: %s", result.message)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_batch(args):
    from .workflow.batch import run_batch

    bundle = _load(args, strict=False)
    for sid, issue in bundle.issues.items():
        log.error("scenario %s skipped: %s", sid, issue)
    scenarios = [_overrides(args, sc) for sc in bundle.scenarios]
    if args.scenario_id:
        scenarios = [_overrides(args, _select(bundle, s)) for s in args.scenario_id]
    out = Path(args.out)
    batch = run_batch(scenarios, jobs=args.jobs, root=out, force=args.force,
                      manifest_path=out / "manifest.jsonl")
    code = EXIT_VALIDATION if bundle.issues else EXIT_OK
    for entry in batch.manifest:
        _emit(entry)
        if entry["error_type"]:
            io = entry["error_type"] in _IO_ERRORS or entry["error_type"].endswith("OSError")
            code = max(code, EXIT_IO if io else EXIT_SOLVER)
        elif entry["stop_reason"] == "solver_failure":
            code = max(code, EXIT_SOLVER)
    return code


def _reference(args):
    from .workflow.comparison import read_reference_csv
    from .workflow.timeseries import read_timeseries, records_to_series

    path = _existing(args.reference_csv, "reference CSV")
    if args.signal_map:
        return read_reference_csv(path, _existing(args.signal_map, "signal map"))
    records, names = read_timeseries(path)
    return records_to_series(records, names)


def cmd_calibrate(args):
    from .workflow.calibration import calibrate_correction_factors

    bundle = _load(args)
    sc = _overrides(args, _select(bundle, args.scenario_id))
    ref = _reference(args)
    initial = {} if args.initial is None else {n: args.initial for n in args.free_params}
    report = calibrate_correction_factors(ref, sc, free_params=args.free_params, initial=initial,
                                          max_iter=args.max_iter)
    _emit(dict(scenario=sc.id, values=report.values, c=list(report.plant.c), rmse=report.rmse,
               rmse_signals=report.rmse_signals, objective=report.objective,
               n_evaluations=report.n_evaluations, success=report.success, message=report.message))
    return EXIT_OK


def cmd_compare(args):
    from .workflow.comparison import compare_series
    from .workflow.timeseries import read_timeseries, records_to_series

    records, names = read_timeseries(_existing(args.simulation_csv, "simulation CSV"))
    sim = records_to_series(records, names)
    ref = _reference(args)
    S = records[0].n.size
    signals = args.signals or [s for s in ("T_1", f"T_{S}") if s in ref.signals]
    if not signals:
        raise ComparisonError("no common signals to compare")
    report = compare_series(sim, ref, signals)
    _emit(report.to_dict())
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="batchdist", description="Batch-distillation simulation workflow.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def config_flags(sp):
        sp.add_argument("--plant-config", required=True, help="plant/control XML")
        sp.add_argument("--property-config", help="property XML (default: the file named in the plant XML)")

    def run_flags(sp):
        sp.add_argument("--horizon", type=float, help="override the simulated horizon (s)")
        sp.add_argument("--sample-interval", type=float, help="override the output cadence (s)")

    sp = sub.add_parser("validate", help="parse and validate both configuration files")
    config_flags(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", help="run one scenario and write its CSV")
    config_flags(sp)
    run_flags(sp)
    sp.add_argument("--scenario-id", required=True)
    sp.add_argument("--out", default=".", help="dataset root")
    sp.add_argument("--force", action="store_true", help="overwrite a differing configuration")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("batch", help="run all scenarios into the dataset layout")
    config_flags(sp)
    run_flags(sp)
    sp.add_argument("--scenario-id", action="append", help="restrict to these ids (repeatable)")
    sp.add_argument("--out", default=".", help="dataset root")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("calibrate", help="fit correction factors to a reference CSV")
    config_flags(sp)
    run_flags(sp)
    sp.add_argument("--scenario-id", required=True)
    sp.add_argument("--reference-csv", required=True)
    sp.add_argument("--signal-map", help="JSON column/unit map for a wide CSV")
    sp.add_argument("--free-params", nargs="+", default=["c_shared"], choices=["c_shared", "c1"])
    sp.add_argument("--initial", type=float, help="initial value for every free parameter")
    sp.add_argument("--max-iter", type=int, default=40)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("compare", help="RMSE/max deviation of a reference against a run")
    sp.add_argument("--simulation-csv", required=True)
    sp.add_argument("--reference-csv", required=True)
    sp.add_argument("--signal-map", help="JSON column/unit map for a wide CSV")
    sp.add_argument("--signals", nargs="+", help="schema column names (default: T_1 and T_S)")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else
                        logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        sys.stderr.write("--jobs must be >= 1\n")
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (BatchDistError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exit_code_for(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
