"""
Command-line interface for the inherent-ODE experiments.
Runs catalog problems over method/version combinations, lists the catalog
and runs the property suite.
"""
import argparse
import logging
import sys
import time
from typing import Dict, List, Optional, Sequence, Tuple

from ..core.diagnostics import run_property_suite
from ..core.errors import ConfigurationError, InherentDaeError
from ..core.formatting import format_table, write_csv
from ..core.models import IntegratorSpec, Method, ProblemSpec, RunReport, RunRow, SolverConfig, Version
from ..problems.catalog import CATALOG, PresetRow, get_problem, list_problems, measure, suite_inputs

logger = logging.getLogger(__name__)

EXIT_FAILED_ROW = 1
EXIT_BAD_CONFIGURATION = 2

_METHODS = {m.value: m for m in Method}
_VERSIONS = {v.value: v for v in Version}


def create_parser() -> argparse.ArgumentParser:
    """
    Create argument parser for CLI.

    Returns:
        Configured ArgumentParser
    """
    parser = argparse.ArgumentParser(
        prog="dae-experiments",
        description="Integrate DAEs through their inherent ODEs and compare methods",
        epilog="Use 'list-problems' to see the built-in problems and their parameters"
    )

    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Log progress of the numerical core (INFO)"
    )

    parser.add_argument(
        "--debug",
        action="store_true",
        help="Log Gauss-Newton iterations and step rejections (DEBUG)"
    )

    parser.add_argument(
        "--version",
        action="version",
        version="%(prog)s 0.1.0"
    )

    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Integrate a problem with one or more method/version combinations")

    run.add_argument(
        "--problem",
        required=True,
        choices=list(CATALOG),
        help="Built-in problem"
    )

    run.add_argument(
        "--method",
        type=str.upper,
        choices=list(_METHODS),
        help="Time-stepping scheme"
    )

    run.add_argument(
        "--version",
        type=str.upper,
        choices=list(_VERSIONS),
        help="Inherent-ODE version, or DIRECT for the reduced DAE"
    )

    run.add_argument(
        "--stages",
        type=int,
        help="Stage count (default: 7 for DORMAND-PRINCE, 1 for IMPLICIT-EULER, 2 otherwise)"
    )

    mode = run.add_mutually_exclusive_group()
    mode.add_argument(
        "--steps",
        type=int,
        metavar="N",
        help="Fixed grid with N equidistant steps"
    )
    mode.add_argument(
        "--tol",
        type=float,
        metavar="T",
        help="Adaptive steps with atol = rtol = T"
    )

    run.add_argument(
        "--t-end",
        type=float,
        metavar="X",
        help="End of the integration interval (default: the problem's)"
    )

    run.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="K=V",
        help="Override a problem parameter, e.g. delta=-1e3 (repeatable)"
    )

    run.add_argument(
        "--preset",
        action="store_true",
        help="Run the full method/version table of the problem's experiment"
    )

    run.add_argument(
        "--csv",
        metavar="FILE",
        help="Export the report as CSV"
    )

    run.add_argument(
        "--no-timing",
        action="store_true",
        help="Leave wall_ms empty in the CSV so fixed-grid exports are reproducible"
    )

    commands.add_parser("list-problems", help="Show the built-in problems")

    verify = commands.add_parser("verify", help="Run the property suite of the numerical core")

    verify.add_argument(
        "--seed",
        type=int,
        default=0,
        help="Seed of the randomized checks (default: 0)"
    )

    verify.add_argument(
        "--cases",
        type=int,
        default=1000,
        help="Random Taylor expressions to check (default: 1000)"
    )

    return parser


def parse_params(entries: Sequence[str]) -> Dict[str, float]:
    """
    Parse repeated K=V options.

    Raises:
        ConfigurationError: For entries without '=' or with a non-numeric value
    """
    params = {}
    for entry in entries:
        key, sep, value = entry.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"Parameter '{entry}' is not of the form K=V")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ConfigurationError(f"Parameter '{key.strip()}' needs a number, got '{value}'") from None
    return params


def default_stages(method: Method) -> int:
    if method == Method.DORMAND_PRINCE:
        return 7
    if method == Method.IMPLICIT_EULER:
        return 1
    return 2


def run_experiment(
    spec: ProblemSpec,
    combinations: Sequence[PresetRow],
    t_span: Optional[Tuple[float, float]] = None,
    n_steps: Optional[int] = None,
    tol: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> RunReport:
    """
    Integrate a catalog problem once per (method, stages, version) combination.

    Args:
        spec: Problem name and parameter overrides
        combinations: Rows of the report in order
        t_span: Integration interval (defaults to the problem's)
        n_steps: Fixed grid size
        tol: Adaptive tolerance (exactly one of n_steps and tol)
        config: Solver configuration

    Returns:
        RunReport with one row per combination; numerical failures are
        recorded in the row and the run continues

    Raises:
        ConfigurationError: For unknown problems/parameters or invalid combinations
    """
    get_problem(spec.name)
    integrators = [IntegratorSpec(method, stages, version, n_steps=n_steps, tol=tol) for method, stages, version in combinations]
    for integrator in integrators:
        integrator.validate()

    report = RunReport(problem=spec.name)
    for integrator in integrators:
        row = RunRow(
            method=integrator.method.value,
            version=integrator.version.value,
            stages=integrator.stage_label,
            order=integrator.order,
        )
        start = time.perf_counter()
        try:
            result = measure(spec, integrator, t_span, config)
            row.steps = result.steps
            row.max_error = result.max_error
            row.geometric_error = result.geometric_error
            row.constraint_residual = result.constraint_residual
        except InherentDaeError as e:
            logger.info("%s %s failed: %s", integrator.method.value, integrator.version.value, e)
            row.steps = getattr(e, "steps_taken", None)
            row.failure = f"{type(e).__name__}: {e}"
        row.wall_ms = 1e3 * (time.perf_counter() - start)
        report.rows.append(row)
    return report


def _combinations(args, entry) -> List[PresetRow]:
    if args.preset:
        return list(entry.preset)
    if args.method is None or args.version is None:
        raise ConfigurationError("run needs --method and --version, or --preset")
    method = _METHODS[args.method]
    stages = args.stages if args.stages is not None else default_stages(method)
    return [(method, stages, _VERSIONS[args.version])]


def _step_mode(args, entry) -> Tuple[Optional[int], Optional[float]]:
    if args.steps is not None or args.tol is not None:
        return args.steps, args.tol
    return entry.n_steps, entry.tol


def command_run(args) -> int:
    entry = get_problem(args.problem)
    spec = ProblemSpec(name=entry.name, params=parse_params(args.param))
    combinations = _combinations(args, entry)
    n_steps, tol = _step_mode(args, entry)
    t_end = entry.t_span[1] if args.t_end is None else args.t_end
    if t_end <= entry.t_span[0]:
        raise ConfigurationError(f"--t-end must exceed the start time {entry.t_span[0]:g}")
    t_span = (entry.t_span[0], t_end)

    mode = f"{n_steps} steps" if n_steps is not None else f"tol {tol:g}"
    print(f"Running '{entry.name}' on [{t_span[0]:g}, {t_span[1]:g}] with {mode}")
    print(f"  - Characteristic values: mu={entry.chars.mu}, a={entry.chars.a}, d={entry.chars.d}")
    print(f"  - Combinations: {len(combinations)}")

    report = run_experiment(spec, combinations, t_span, n_steps, tol)
    for row in report.rows:
        if row.failed:
            print(f"❌ {row.method} {row.stages} {row.version}: {row.failure}")
        else:
            print(f"✓ {row.method} {row.stages} {row.version}: {row.steps} steps")

    print()
    print(format_table(report))

    if args.csv:
        with open(args.csv, "w", newline="") as f:
            write_csv(report, f, include_timing=not args.no_timing)
        print(f"\n✓ Exported CSV to {args.csv}")

    return EXIT_FAILED_ROW if report.failed else 0


def command_list_problems(args) -> int:
    entries = list_problems()
    print(f"✓ {len(entries)} built-in problems\n")
    for entry in entries:
        print(entry.summary())
    return 0


def command_verify(args) -> int:
    print(f"Running property suite (seed {args.seed})...")
    report = run_property_suite(suite_inputs(), seed=args.seed, taylor_cases=args.cases)
    print()
    print(report.summary())
    return EXIT_FAILED_ROW if report.failed else 0


COMMANDS = {
    "run": command_run,
    "list-problems": command_list_problems,
    "verify": command_verify,
}


def main(argv: Optional[list] = None):
    """
    Main CLI entry point.

    Args:
        argv: Command line arguments (for testing)
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    print(f"Inherent-ODE experiments ({args.command})")
    print("-" * 40)

    try:
        code = COMMANDS[args.command](args)

    except ConfigurationError as e:
        print(f"\nERROR: {e}")
        sys.exit(EXIT_BAD_CONFIGURATION)

    except OSError as e:
        print(f"\nERROR: {e}")
        sys.exit(EXIT_FAILED_ROW)

    except InherentDaeError as e:
        print(f"\nRUNTIME ERROR: {e}")
        sys.exit(EXIT_FAILED_ROW)

    except Exception as e:
        print(f"\nUNEXPECTED ERROR: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(EXIT_FAILED_ROW)

    if code:
        sys.exit(code)
    print("\nDone!")


if __name__ == '__main__':
    main()
