"""Command-line front end.

Exit codes: 0 success, 1 invalid input (unreadable or malformed files,
schema violations, impossible geometry), 2 runtime failure (routing,
fitting or convergence). Diagnostics go to stderr.

CSV columns per subcommand:

* ``decompose``: layer, position, top_mode, theta, phi
* ``reconstruct``: row, col, re, im
* ``simulate``: input_mode, output_mode, measured, ideal
* ``calibrate``: module, mzi, heater, alpha, phi0, visibility, coupling_product, residual_rms
* ``switch``: input_mode, target_output, output_mode, normalized_power, routed_fraction
* ``tritter``: input_mode, output_mode, intensity, normalized_intensity
* ``experiment``: trial, fidelity, error
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import serialize as ser
from .calibration import calibrate
from .config import DeviceConfig, load_config
from .decompose import clements_decompose, reconstruct
from .errors import (
    ConvergenceError,
    DimensionError,
    MeshError,
    ModeIndexError,
    ValidationError,
)
from .linalg import amplitude_fidelity, intensities, spawn_seeds
from .protocols import (
    measure_transfer_matrix,
    program_submesh,
    run_switch_experiment,
    run_universal_experiment,
    self_configure_tritter,
    universal_mzis,
)

log = logging.getLogger("modmesh")


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read: {exc.strerror}") from None
    return ser.loads(text, path)


def _config(args) -> DeviceConfig:
    return load_config(args.config) if args.config else DeviceConfig()


# --- subcommands ----------------------------------------------------------

def cmd_decompose(args):
    u = ser.matrix_from_json(_read_json(args.input), args.input)
    s = clements_decompose(u)
    if args.format == "csv":
        return ser.table_csv(["layer", "position", "top_mode", "theta", "phi"],
                             [[l, q, top, m.theta, m.phi] for l, q, top, m in s.mzis()]), 0
    return ser.dumps(ser.settings_to_json(s)), 0


def cmd_reconstruct(args):
    s = ser.settings_from_json(_read_json(args.input), args.input)
    u = reconstruct(s)
    if args.format == "csv":
        return ser.table_csv(["row", "col", "re", "im"],
                             [[i, j, u[i, j].real, u[i, j].imag]
                              for i in range(u.shape[0]) for j in range(u.shape[1])]), 0
    return ser.dumps(ser.matrix_to_json(u)), 0


def cmd_simulate(args):
    s = ser.settings_from_json(_read_json(args.input), args.input)
    cfg = _config(args)
    a = cfg.build(args.seed)
    cal_seed, noise_seed = spawn_seeds(cfg.seeds(args.seed)[1], 2)
    offset, mesh, park = universal_mzis(a, s.n_modes)
    table = None
    if not args.no_calibrate:
        table = calibrate(a, sorted(set(mesh) | set(park)), args.points, cfg.noise, cal_seed)
    driven = program_submesh(a, s, table)
    modes = list(range(offset, offset + s.n_modes))
    measured = measure_transfer_matrix(driven, modes, modes, cfg.noise, noise_seed)
    u = reconstruct(s)
    ideal = intensities(u)
    if args.format == "csv":
        return ser.intensities_to_csv(modes, measured, ideal), 0
    return ser.dumps({"kind": "simulation", "modes": modes, "measured": measured.tolist(),
                      "ideal": ideal.tolist(),
                      "fidelity": amplitude_fidelity(measured, u)}), 0


def cmd_calibrate(args):
    cfg = _config(args)
    a = cfg.build(args.seed)
    if args.all:
        mzis = None
    else:
        _, mesh, park = universal_mzis(a, 3)
        mzis = sorted(set(mesh) | set(park))
    table = calibrate(a, mzis, args.points, cfg.noise, cfg.seeds(args.seed)[1])
    if args.format == "csv":
        return ser.calibration_to_csv(table), 0
    return ser.dumps(ser.calibration_to_json(table)), 0


def cmd_switch(args):
    cfg = _config(args)
    results = run_switch_experiment(cfg.build(args.seed), args.input_mode, args.max_sweeps)
    if args.format == "csv":
        return ser.switch_to_csv(results), 0
    return ser.dumps(ser.switch_to_json(results)), 0


def cmd_tritter(args):
    cfg = _config(args)
    code = 0
    try:
        result = self_configure_tritter(cfg.build(args.seed), args.max_sweeps, args.tol,
                                        seed=cfg.seeds(args.seed)[1])
    except ConvergenceError as exc:
        # still emit the best configuration found
        print(f"error: {exc}", file=sys.stderr)
        result, code = exc.result, 2
    if args.format == "csv":
        return ser.tritter_to_csv(result), code
    return ser.dumps(ser.tritter_to_json(result)), code


def cmd_experiment(args):
    cfg = _config(args)
    report = run_universal_experiment(cfg.build(args.seed), args.trials, cfg.seeds(args.seed)[1],
                                      cfg.noise, n_cal_points=args.points)
    if args.format == "csv":
        return ser.report_to_csv(report), 0
    return ser.dumps(ser.report_to_json(report)), 0


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides the config's)")
    common.add_argument("--config", help="device config JSON (default: built-in three-chip device)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="modmesh",
                                description="Simulate and program modular MZI-mesh chips.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("decompose", parents=[common], help="unitary matrix JSON -> mesh settings")
    c.add_argument("input", help="matrix JSON with 're'/'im' arrays")
    c.set_defaults(func=cmd_decompose)

    c = sub.add_parser("reconstruct", parents=[common], help="mesh settings -> unitary matrix JSON")
    c.add_argument("input", help="mesh settings JSON")
    c.set_defaults(func=cmd_reconstruct)

    c = sub.add_parser("simulate", parents=[common],
                       help="program settings onto the device and measure intensities")
    c.add_argument("input", help="mesh settings JSON")
    c.add_argument("--points", type=int, default=256, help="calibration scan points")
    c.add_argument("--no-calibrate", action="store_true",
                   help="program through nominal tuning curves")
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", parents=[common], help="fringe-scan calibration table")
    c.add_argument("--all", action="store_true", help="every connected MZI, not just the sub-mesh")
    c.add_argument("--points", type=int, default=256)
    c.set_defaults(func=cmd_calibrate)

    c = sub.add_parser("switch", parents=[common], help="route one input to each reachable output")
    c.add_argument("--input-mode", type=int, default=None)
    c.add_argument("--max-sweeps", type=int, default=10)
    c.set_defaults(func=cmd_switch)

    c = sub.add_parser("tritter", parents=[common], help="self-configure a balanced 3x3 splitter")
    c.add_argument("--max-sweeps", type=int, default=60)
    c.add_argument("--tol", type=float, default=1e-6)
    c.set_defaults(func=cmd_tritter)

    c = sub.add_parser("experiment", parents=[common], help="random-unitary fidelity study")
    c.add_argument("--trials", type=int, default=50)
    c.add_argument("--points", type=int, default=256)
    c.set_defaults(func=cmd_experiment)
    return p


def _exit_code(exc: MeshError) -> int:
    return 1 if isinstance(exc, (ValidationError, DimensionError, ModeIndexError)) else 2


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are input errors here
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text, code = args.func(args)
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"error: {args.out}: {exc.strerror}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return code


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
