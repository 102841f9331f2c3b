"""
Command-line entry point.

    superlattice simulate SCENARIO [--out DIR] [--threads K] [--plots]
    superlattice check --golden DIR --fresh DIR [--tol R]
    superlattice phasematch --theta-c DEG --pump NM [--crystal NAME]

Exit codes: 0 success, 1 invalid input, 2 computation failure,
3 regression mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .dispersion import CRYSTALS
from .phasematch import NoPhaseMatchingError, PumpSpec, collinear_signal_wavelength, idler_wavelength
from .regression import DEFAULT_TOL, regression_check
from .runner import ComputationError, run_scenario
from .scenario import ScenarioError, parse_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION, EXIT_REGRESSION = 0, 1, 2, 3

log = logging.getLogger("superlattice")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for computation errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def builtin_scenarios() -> list[str]:
    root = resources.files("superlattice") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def resolve_scenario(name: str) -> Path:
    """A path, or the name of a bundled scenario such as ``fig2``."""
    path = Path(name)
    if path.is_file():
        return path
    bundled = resources.files("superlattice") / "scenarios" / f"{name.removesuffix('.toml')}.toml"
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError(f"scenario {name!r} not found (bundled: {', '.join(builtin_scenarios())})")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="superlattice", description="Biphoton interference in crystal superlattices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a scenario file")
    sim.add_argument("scenario", help="scenario TOML file or bundled scenario name")
    sim.add_argument("--out", help="output directory (default: output_dir from the scenario)")
    sim.add_argument("--threads", type=_positive_int, default=1, help="worker threads (results do not depend on it)")
    sim.add_argument("--plots", action="store_true", help="also write SVG figures")

    chk = sub.add_parser("check", help="compare fresh CSV output with golden files")
    chk.add_argument("--golden", required=True)
    chk.add_argument("--fresh", required=True)
    chk.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL, help="relative tolerance")

    pm = sub.add_parser("phasematch", help="collinear signal/idler wavelengths for a cut angle")
    pm.add_argument("--theta-c", type=float, required=True, help="cut angle in degrees")
    pm.add_argument("--pump", type=_positive_float, required=True, help="pump wavelength in nm")
    pm.add_argument("--crystal", default="cln_edwards1984", choices=sorted(CRYSTALS))
    return parser


def _simulate(args) -> int:
    try:
        scenario = parse_scenario(resolve_scenario(args.scenario))
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        manifest = run_scenario(scenario, args.out, threads=args.threads, plots=args.plots or None)
    except ComputationError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    out = args.out or scenario.output_dir
    print(f"{scenario.name}: {len(manifest.get('files', {}))} files in {out} "
          f"({manifest['wall_time_s']:.2f} s, config {manifest['config_hash'][:12]})")
    return EXIT_OK


def _check(args) -> int:
    try:
        report = regression_check(args.golden, args.fresh, tol=args.tol)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_REGRESSION


def _phasematch(args) -> int:
    try:
        pump = PumpSpec(wavelength=args.pump * 1e-9, cut_angle=np.deg2rad(args.theta_c))
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        lam_s = collinear_signal_wavelength(pump, CRYSTALS[args.crystal],
                                            band=(1.02 * pump.wavelength, 2 * pump.wavelength))
    except (NoPhaseMatchingError, ValueError) as exc:
        print(f"no phase matching: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    lam_i = float(idler_wavelength(pump.wavelength, lam_s))
    print("quantity,value,unit")
    print(f"signal_wavelength,{lam_s * 1e9:.15e},nm")
    print(f"idler_wavelength,{lam_i * 1e9:.15e},nm")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return {"simulate": _simulate, "check": _check, "phasematch": _phasematch}[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
