"""Command-line front end: solve instances, check properness, reproduce tables.

Exit codes: 0 success, 1 benchmark comparison failure, 2 input validation
failure, 3 solver precondition failure (improper policy, value function not
uniformly improvable, or a steps-bound method invoked outside its
precondition), 4 horizon cap exceeded. Every failure writes a single-line
JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import gridworld as gw
from .core import (
    SspProblem,
    load_problem,
    problem_to_json_dict,
    save_problem,
)
from .dp import (
    IterationTrace,
    evaluate_policy,
    greedy_policy,
    is_uniformly_improvable,
    policy_iteration,
    value_iteration,
)
from .errors import (
    HorizonCapExceeded,
    MaxItersExceeded,
    ProblemFormatError,
    SolverPreconditionError,
    ValidationError,
)
from .properness import all_policies_proper, is_proper, uniform_random_policy

EXIT_OK = 0
EXIT_BENCH_MISMATCH = 1
EXIT_VALIDATION = 2
EXIT_PRECONDITION = 3
EXIT_HORIZON_CAP = 4


@dataclass(frozen=True)
class RunConfig:
    """Resolved options of one CLI invocation."""

    command: str
    input: str | None = None
    algorithm: str = "pi"
    init: str = "uniform-random"
    epsilon: float = 1e-6
    max_iters: int = 10_000
    bounds_method: str = "auto"
    seed: int = 0
    output_format: str = "csv"
    output: str | None = None
    table: str | None = None
    values: str | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _error_line(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(payload) + "\n")


def _load_values_file(path: str, problem: SspProblem, convention: str) -> np.ndarray:
    """Read a value-function file written in the problem file's convention."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"value file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "values" not in data:
        raise ProblemFormatError("value file must be an object with a 'values' field")
    values = np.asarray(data["values"], dtype=float)
    if values.shape != (problem.num_states,):
        raise ProblemFormatError(
            f"value file must list {problem.num_states} entries, got {values.shape}"
        )
    if convention == "reward":
        values = np.negative(values)
    if values[problem.terminal] != 0.0:
        raise ProblemFormatError("value at the terminal state must be 0")
    if not np.isfinite(values).all():
        raise ProblemFormatError("value file entries must be finite")
    return values


def _initial_values(config: RunConfig, problem: SspProblem, convention: str) -> np.ndarray:
    if config.init == "uniform-random":
        return evaluate_policy(problem, uniform_random_policy(problem))
    if config.init == "zero":
        return np.zeros(problem.num_states)
    return _load_values_file(config.init, problem, convention)


def _trace_table(
    problem: SspProblem,
    trace: IterationTrace,
    sign: float,
    method: str,
) -> tuple[list, list, list]:
    """Per-iteration J floor, steps bound, and error columns for the trace CSV.

    The floor is reported in the file's convention; steps bounds are left
    blank on iterates where the resolved method's precondition fails.
    """
    mask = np.ones(problem.num_states, dtype=bool)
    mask[problem.terminal] = False
    mask &= ~bounds_mod.immediate_termination_states(problem)
    j_under, m_col, error_col = [], [], []
    for record in trace.records:
        floor = float((sign * record.values[mask]).min()) if mask.any() else 0.0
        j_under.append(floor)
        try:
            steps = _steps_for(problem, record.values, method)
            m = float(steps[mask].max()) if mask.any() else 1.0
        except (SolverPreconditionError, HorizonCapExceeded):
            m = None
        m_col.append(m)
        if m is None or record.residual is None:
            error_col.append(None)
        else:
            error_col.append(m * record.residual)
    return j_under, m_col, error_col


def _steps_for(problem: SspProblem, values: np.ndarray, method: str) -> np.ndarray:
    if method == "positive-cost":
        return bounds_mod.steps_bound_positive_costs(problem, values)
    if method == "all-proper":
        return bounds_mod.steps_bound_all_proper(problem)
    certificate = bounds_mod.termination_horizon(problem, values)
    return bounds_mod.steps_bound_from_horizon(problem, certificate)


def cmd_solve(config: RunConfig) -> int:
    problem, convention = load_problem(config.input)
    sign = -1.0 if convention == "reward" else 1.0
    initial = _initial_values(config, problem, convention)
    # every bound this command reports relies on a uniformly improvable start
    bounds_mod.require_uniformly_improvable(problem, initial)

    # A truncated run is not an error: the final iterate still carries
    # valid bounds, so report what we have and note the truncation.
    truncated = False
    try:
        if config.algorithm == "vi":
            values, trace = value_iteration(
                problem, initial, config.epsilon, config.max_iters
            )
        else:
            if config.init == "uniform-random":
                start_policy = uniform_random_policy(problem)
            else:
                start_policy = greedy_policy(problem, initial)
            _, values, trace = policy_iteration(problem, start_policy, config.max_iters)
    except MaxItersExceeded as exc:
        values, trace = exc.values, exc.trace
        truncated = True

    method = bounds_mod.resolve_method(problem, config.bounds_method)
    report = bounds_mod.compute_bounds_report(problem, values, method)

    if config.output_format == "csv":
        j_under, m_col, error_col = _trace_table(problem, trace, sign, method)
        _emit(trace.to_csv(j_under=j_under, m=m_col, error=error_col), config.output)
    else:
        j_under, m_col, error_col = _trace_table(problem, trace, sign, method)
        payload = {
            "config": {
                "algorithm": config.algorithm,
                "init": config.init,
                "epsilon": config.epsilon,
                "max_iters": config.max_iters,
                "bounds_method": method,
                "seed": config.seed,
                "convention": convention,
                "truncated": truncated,
            },
            "trace": [
                {
                    "iter": rec.iteration,
                    "J_under": j_under[k],
                    "m": m_col[k],
                    "residual": rec.residual,
                    "error": error_col[k],
                }
                for k, rec in enumerate(trace.records)
            ],
            "values": [sign * v for v in values.tolist()],
            "bounds": report.to_json_dict(),
        }
        _emit(json.dumps(payload, indent=2) + "\n", config.output)
    return EXIT_OK


def cmd_bench(config: RunConfig) -> int:
    problem = gw.build_gridworld()
    if config.table == "table2":
        rows = gw.run_table2(problem)
        mismatches = gw.compare_table2(rows)
        _emit(gw.table2_csv(rows), config.output)
        compared = f"{len(rows)} rows x {len(rows[0].values)} states"
    else:
        rows = gw.run_table1(problem, config.algorithm)
        expected = (
            gw.EXPECTED_TABLE1_VI if config.algorithm == "vi" else gw.EXPECTED_TABLE1_PI
        )
        mismatches = gw.compare_table1(rows, expected, config.algorithm)
        _emit(gw.table1_csv(rows), config.output)
        compared = f"{len(rows)} rows"
    if mismatches:
        for line in mismatches:
            sys.stderr.write(line + "\n")
        sys.stderr.write(f"FAIL: {len(mismatches)} cells outside tolerance\n")
        return EXIT_BENCH_MISMATCH
    sys.stdout.write(f"PASS: {compared} compared\n")
    return EXIT_OK


def cmd_check(config: RunConfig) -> int:
    problem, convention = load_problem(config.input)
    report = all_policies_proper(problem)
    uniform = is_proper(problem, uniform_random_policy(problem))
    payload: dict = {
        "convention": convention,
        "all_policies_proper": report.to_json_dict(),
        "uniform_random_policy": uniform.to_json_dict(),
    }
    if config.values:
        values = _load_values_file(config.values, problem, convention)
        improvable = is_uniformly_improvable(problem, values)
        payload["uniformly_improvable"] = improvable
        if improvable:
            certificate = bounds_mod.termination_horizon(problem, values)
            payload["horizon_certificate"] = certificate.to_json_dict()
    _emit(json.dumps(payload, indent=2) + "\n", config.output)
    return EXIT_OK


def cmd_convert(config: RunConfig) -> int:
    problem, convention = load_problem(config.input)
    flipped = "reward" if convention == "cost" else "cost"
    if config.output:
        save_problem(problem, config.output, convention=flipped)
    else:
        text = json.dumps(problem_to_json_dict(problem, flipped), indent=2)
        sys.stdout.write(text + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sspbounds",
        description="Shortest path MDP solvers with certified suboptimality bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run a solver and report bounds")
    solve.add_argument("--input", required=True, help="problem JSON file")
    solve.add_argument("--algorithm", choices=("vi", "pi"), default="pi")
    solve.add_argument(
        "--init",
        default="uniform-random",
        help="'uniform-random', 'zero', or a value-function JSON file",
    )
    solve.add_argument("--epsilon", type=float, default=1e-6)
    solve.add_argument("--max-iters", type=int, default=10_000)
    solve.add_argument(
        "--bounds",
        choices=("auto", "positive-cost", "all-proper", "general"),
        default="auto",
    )
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--format", choices=("csv", "json"), default="csv")
    solve.add_argument("--output", default=None)

    bench = sub.add_parser("bench", help="reproduce the gridworld tables")
    bench.add_argument("table", choices=("table1", "table2"))
    bench.add_argument("--algorithm", choices=("vi", "pi"), default="pi")
    bench.add_argument("--output", default=None)

    check = sub.add_parser("check", help="properness and improvability analysis")
    check.add_argument("--input", required=True)
    check.add_argument("--values", default=None, help="value-function JSON file")
    check.add_argument("--output", default=None)

    convert = sub.add_parser("convert", help="flip a file between reward and cost form")
    convert.add_argument("--input", required=True)
    convert.add_argument("--output", default=None)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    seed = args.seed if hasattr(args, "seed") else 0
    env_seed = os.environ.get("SSP_SEED")
    if env_seed is not None:
        seed = int(env_seed)
    return RunConfig(
        command=args.command,
        input=getattr(args, "input", None),
        algorithm=getattr(args, "algorithm", "pi"),
        init=getattr(args, "init", "uniform-random"),
        epsilon=getattr(args, "epsilon", 1e-6),
        max_iters=getattr(args, "max_iters", 10_000),
        bounds_method=getattr(args, "bounds", "auto"),
        seed=seed,
        output_format=getattr(args, "format", "csv"),
        output=getattr(args, "output", None),
        table=getattr(args, "table", None),
        values=getattr(args, "values", None),
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
    except ValueError as exc:
        _error_line(exc)
        return EXIT_VALIDATION
    handlers = {
        "solve": cmd_solve,
        "bench": cmd_bench,
        "check": cmd_check,
        "convert": cmd_convert,
    }
    try:
        return handlers[config.command](config)
    except ValidationError as exc:
        _error_line(exc)
        return EXIT_VALIDATION
    except SolverPreconditionError as exc:
        _error_line(exc)
        return EXIT_PRECONDITION
    except HorizonCapExceeded as exc:
        _error_line(exc)
        return EXIT_HORIZON_CAP
    except OSError as exc:
        _error_line(exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
