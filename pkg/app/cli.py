"""
Command-line entry point: ``python -m app.cli <command>``.

Commands:
    run               run a preset or a run-config file
    validate-mesh     minimum-overlap and coverage checks for a preset or mesh file
    bench             timed runs over worker counts with scaling metrics
    train-classifier  train the smoothness classifier and write its weight file
    oracle            exact Riemann profiles, oblique-shock angles, shock states

Solver failures print one JSON line to stderr and exit with code 2;
unexpected exceptions exit with code 1.
"""
import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigurationError, SolverError, UsageError
from app.core.logger import setup_logging
from app.models.run import RunConfig
from app.services.decomposition import check_coverage, check_min_overlap
from app.services.driver import bench, run
from app.services.mesh_io import load_mesh, save_mesh
from app.services.oracles import exact_riemann_1d, oblique_shock
from app.services.problems import get_problem, list_problems, shock_state_check
from app.services.scaling import scaling_markdown

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_SOLVER_ERROR = 2


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _options(pairs: Optional[Sequence[str]]) -> dict:
    """``key=value`` pairs; values are parsed as JSON when possible."""
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError("problem options must be key=value", option=pair)
        key, value = pair.split("=", 1)
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _emit(data) -> None:
    print(json.dumps(data, indent=2, default=str))


# -- commands ---------------------------------------------------------------------


def cmd_run(args) -> int:
    if args.config:
        config = RunConfig.from_file(Path(args.config))
    elif args.problem:
        config = RunConfig(problem=args.problem)
    else:
        raise UsageError("run needs --config or --problem")
    overrides = {
        "t_end": args.T,
        "cfl": args.cfl,
        "hbar": args.hbar,
        "scale": args.scale,
        "max_steps": args.max_steps,
        "output_every": args.output_every,
        "workers": args.workers,
        "transport": args.transport,
        "classifier_variant": args.classifier,
        "classifier_weights": args.weights,
        "output_dir": args.output_dir,
        "run_name": args.name,
        "mesh": args.mesh,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.option:
        overrides["problem_options"] = {**config.problem_options, **_options(args.option)}
    if overrides:
        try:
            config = RunConfig.model_validate({**config.model_dump(), **overrides})
        except ValidationError as e:
            raise ConfigurationError("invalid run options", errors=e.errors(include_url=False))
    result = run(config)
    _emit(result.model_dump())
    return EXIT_OK


def cmd_validate_mesh(args) -> int:
    if args.mesh:
        dec = load_mesh(Path(args.mesh))
        if dec.domain is None and args.problem:
            dec.domain = get_problem(args.problem).domain
    elif args.problem:
        dec = get_problem(args.problem, **_options(args.option)).decomposition(
            settings, hbar=args.hbar
        )
    else:
        raise UsageError("validate-mesh needs --problem or --mesh")
    overlap = check_min_overlap(dec)
    report = {"summary": dec.summary(), "overlap": overlap.model_dump()}
    if dec.domain is not None and args.samples:
        report["coverage"] = check_coverage(dec, args.samples).model_dump()
    if args.save:
        report["saved"] = str(save_mesh(dec, Path(args.save)))
    _emit(report)
    return EXIT_OK if overlap.passed else EXIT_SOLVER_ERROR


def cmd_bench(args) -> int:
    records = bench(
        args.problem,
        args.workers,
        steps=args.steps,
        weak=args.weak,
        transport=args.transport,
        output_dir=args.output_dir,
        problem_options=_options(args.option),
    )
    print(scaling_markdown(records, title=f"Scaling: {args.problem}"))
    return EXIT_OK


def cmd_train_classifier(args) -> int:
    from app.services.classifier_training import TrainingConfig, train_classifier

    config = TrainingConfig(
        stencil=args.stencil,
        samples_per_class=args.samples,
        epochs=args.epochs,
        min_accuracy=args.min_accuracy,
        seed=args.seed,
        output=args.output,
    )
    _, report = train_classifier(config)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_oracle_riemann(args) -> int:
    x = np.linspace(args.x_min, args.x_max, args.points)
    solution = exact_riemann_1d(args.left, args.right, args.t, x, x0=args.x0, gamma=args.gamma)
    if args.csv:
        print("x,rho,u,p")
        for row in zip(solution.x, solution.rho, solution.u, solution.p):
            print(",".join(f"{v:.17g}" for v in row))
    else:
        _emit(solution.to_dict())
    return EXIT_OK


def cmd_oracle_oblique(args) -> int:
    shock = oblique_shock(args.M, args.wedge, args.gamma)
    if args.json:
        _emit(asdict(shock))
    else:
        print(f"{shock.weak:.1f}")
    return EXIT_OK


def cmd_oracle_shock_state(args) -> int:
    convention = args.convention or settings.shock_density_convention
    _emit(shock_state_check(args.M, args.x_s, args.gamma, convention))
    return EXIT_OK


def cmd_problems(args) -> int:
    _emit(list_problems())
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcflow", description="FC overlapping-patch Euler solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a preset or a run-config file")
    p.add_argument("--config", help="run-config JSON file")
    p.add_argument("--problem", help="built-in problem name")
    p.add_argument("--mesh", help="mesh file replacing the preset geometry")
    p.add_argument("--option", action="append", metavar="KEY=VALUE", help="preset option")
    p.add_argument("--T", type=float, help="end time")
    p.add_argument("--cfl", type=float)
    p.add_argument("--hbar", type=float, help="refinement bound")
    p.add_argument("--scale", type=float, help="factor applied to the preset refinement bound")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--output-every", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--transport", choices=["thread", "process", "mpi"])
    p.add_argument("--classifier", choices=["fallback", "ann"])
    p.add_argument("--weights", help="classifier weight file")
    p.add_argument("--output-dir")
    p.add_argument("--name", help="run directory name")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate-mesh", help="check overlaps and coverage")
    p.add_argument("--problem")
    p.add_argument("--mesh")
    p.add_argument("--option", action="append", metavar="KEY=VALUE")
    p.add_argument("--hbar", type=float)
    p.add_argument("--samples", type=int, default=4000, help="coverage samples (0 skips)")
    p.add_argument("--save", help="write the decomposition as a mesh file")
    p.set_defaults(func=cmd_validate_mesh)

    p = sub.add_parser("bench", help="scaling sweep")
    p.add_argument("--problem", required=True)
    p.add_argument("--workers", type=_ints, default=[1, 2, 4], help="e.g. 1,2,4")
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--weak", choices=["refine", "matrix"])
    p.add_argument("--transport", choices=["thread", "process", "mpi"])
    p.add_argument("--option", action="append", metavar="KEY=VALUE")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train-classifier", help="train the smoothness classifier")
    p.add_argument("--output", default=settings.classifier_weights)
    p.add_argument("--stencil", type=int, default=settings.visc_stencil)
    p.add_argument("--samples", type=int, default=5000, help="training stencils per class")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--min-accuracy", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_classifier)

    sub.add_parser("problems", help="list built-in problems").set_defaults(func=cmd_problems)

    oracle = sub.add_parser("oracle", help="closed-form reference solutions")
    osub = oracle.add_subparsers(dest="oracle", required=True)

    p = osub.add_parser("riemann", help="exact 1D Riemann profile")
    p.add_argument("--left", type=_floats, required=True, help="rho,u,p")
    p.add_argument("--right", type=_floats, required=True, help="rho,u,p")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x0", type=float, default=0.5)
    p.add_argument("--x-min", type=float, default=0.0)
    p.add_argument("--x-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--gamma", type=float, default=settings.gamma)
    p.add_argument("--csv", action="store_true", help="print x,rho,u,p rows")
    p.set_defaults(func=cmd_oracle_riemann)

    p = osub.add_parser("oblique", help="weak oblique-shock angle in degrees")
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--wedge", type=float, required=True, help="full wedge angle in degrees")
    p.add_argument("--gamma", type=float, default=settings.gamma)
    p.add_argument("--json", action="store_true", help="print both branches")
    p.set_defaults(func=cmd_oracle_oblique)

    p = osub.add_parser("shock-state", help="shock initial states and jump residuals")
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--x-s", type=float, default=0.0)
    p.add_argument("--convention", choices=["tabulated", "rankine_hugoniot"])
    p.add_argument("--gamma", type=float, default=settings.gamma)
    p.set_defaults(func=cmd_oracle_shock_state)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(stream=sys.stderr)
    try:
        return args.func(args)
    except SolverError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return EXIT_SOLVER_ERROR
    except Exception as e:
        logger.exception(f"Unexpected failure in '{args.command}': {e}")
        print(json.dumps({"error": "unexpected", "message": str(e), "context": {}}), file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
