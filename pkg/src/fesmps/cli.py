"""Command-line entry point ``fes``.

Every RunConfig field can come from a TOML file (``--config``) and be
overridden by a flag of the same name.  Exit codes: 0 success, 2 some stage
or entry was flagged, 1 fatal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import FESError
from .pipeline import (
    RunConfig,
    RunLock,
    RunManifest,
    analyze_stage,
    load_states,
    observe_stage,
    run_pipeline,
    solve_stage,
    validate_states,
)
from .statefile import read_state

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("fesmps")


def _add_config_flags(p, skip=()):
    p.add_argument("--config", type=Path, help="TOML file with RunConfig fields")
    for f in dataclasses.fields(RunConfig):
        if f.name in skip:
            continue
        flag = f"--{f.name.replace('_', '-')}"
        if f.type in ("bool", bool):
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        elif f.name in RunConfig.LIST_FIELDS:
            p.add_argument(flag, dest=f.name, default=None, help="comma-separated list")
        else:
            cast = {"float": float, "int": int}.get(str(f.type), str)
            p.add_argument(flag, dest=f.name, type=cast, default=None)


def _config(args, **extra) -> RunConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in dataclasses.fields(RunConfig)}
    overrides.update({k: v for k, v in extra.items() if v is not None})
    if args.config is not None:
        return RunConfig.from_toml(args.config, overrides)
    return RunConfig.from_mapping(overrides)


def _exit_code(manifest: RunManifest, stages):
    statuses = [manifest.status(s) for s in stages]
    return EXIT_OK if all(s == "ok" for s in statuses) else EXIT_PARTIAL


def _print_report(report):
    for label, est in report.get("exponents", {}).items():
        print(f"{label:>8s}  2Delta = {est['two_delta']:.6f} +/- {est['ci9973']:.2e}  "
              f"s* = {est['s_star']}  s0 = {est['s0']:.4g}  [{est['method']}]")
    for cc in report.get("central_charge", []):
        print(f"c[{cc['source']}] = {cc['c']:.5f} +/- {cc['ci95']:.2e}")
    if "kappa" in report:
        k = report["kappa"]
        print(f"kappa = {k['kappa']:.4f} +/- {k['kappa_ci95']:.2e}  c_from_kappa = {k['c_from_kappa']:.4f}")
    for key, err in report.get("errors", {}).items():
        print(f"error[{key}]: {err}")


def cmd_solve(args):
    cfg = _config(args)
    root = Path(cfg.out)
    with RunLock(root):
        manifest = RunManifest.load(root, cfg.to_dict())
        try:
            states = solve_stage(cfg, root, manifest)
        finally:
            manifest.save()
    for D, (state, _) in states.items():
        entry = manifest.data["stages"]["solve"]["entries"][str(D)]
        print(f"D={D:3d}  e = {entry['info'].get('energy_density', float('nan')):.14f}  [{entry['status']}]")
    return _exit_code(manifest, ["solve"])


def _state_params(states_dir):
    path = next(iter(sorted(Path(states_dir).glob("state_D*.json"))), None)
    if path is None:
        raise FESError(f"no state files in {states_dir}")
    _, meta = read_state(path)
    return meta["model"], meta["params"]


def cmd_observe(args):
    states_dir = Path(args.states)
    model, params = _state_params(states_dir)
    obs_dir = Path(args.out) if args.out else states_dir / "obs"
    cfg = _config(args, model=model, J=params["J"], h=params["h"], out=str(obs_dir))
    states = load_states(states_dir)
    with RunLock(obs_dir):
        manifest = RunManifest.load(obs_dir, cfg.to_dict())
        try:
            records = observe_stage(cfg, states, obs_dir, manifest)
        finally:
            manifest.save()
    for D, rec in records.items():
        print(f"D={D:3d}  mu2 = {rec.mu2:.6g}  S_half = {rec.half_line.S:.6f}")
    return _exit_code(manifest, ["observe"])


def cmd_analyze(args):
    data_dir = Path(args.data)
    obs_dir = data_dir / "obs" if (data_dir / "obs" / "observables.json").exists() else data_dir
    cfg = _config(args, out=str(data_dir))
    report_path = Path(args.report) if args.report else data_dir / "report.json"
    csv_dir = Path(args.csv_dir) if args.csv_dir else data_dir / "report_csv"
    with RunLock(data_dir):
        manifest = RunManifest.load(data_dir, cfg.to_dict())
        try:
            report = analyze_stage(cfg, obs_dir, report_path, csv_dir, manifest)
        finally:
            manifest.save()
    _print_report(report)
    return _exit_code(manifest, ["analyze"])


def cmd_run(args):
    cfg = _config(args)
    manifest = run_pipeline(cfg)
    report_path = Path(cfg.out) / "report.json"
    if report_path.exists():
        import json

        _print_report(json.loads(report_path.read_text()))
    return _exit_code(manifest, ["solve", "observe", "analyze"])


def cmd_validate(args):
    root = Path(args.states)
    if not root.is_dir():
        print(f"{root}: not a directory", file=sys.stderr)
        return EXIT_FATAL
    problems = validate_states(root)
    for p in problems:
        print(f"{p['path']}: {p['problem']}")
    if not problems:
        print(f"{root}: no violations")
        return EXIT_OK
    return EXIT_PARTIAL


def build_parser():
    parser = argparse.ArgumentParser(prog="fes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="ground states over a bond-dimension sweep")
    _add_config_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("observe", help="correlators, spectra and entropies of stored states")
    p.add_argument("--states", required=True, help="directory with state_D*.json files")
    _add_config_flags(p, skip=("model", "J", "h"))
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser("analyze", help="scaling fits and report")
    p.add_argument("--data", required=True, help="run directory (or its obs/ directory)")
    p.add_argument("--report", default=None, help="report path (default <data>/report.json)")
    p.add_argument("--csv-dir", dest="csv_dir", default=None, help="CSV directory (default <data>/report_csv)")
    _add_config_flags(p, skip=("out",))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="solve, observe and analyze in one run directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="re-check stored states and the manifest")
    p.add_argument("states", help="directory with state files")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FESError as exc:
        print(f"fes: error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (OSError, ValueError) as exc:
        print(f"fes: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
