"""Command-line entry point: ``skorohod <task> --scenario <file-or-name> [...]``.

Exit status is 0 when every check passes, 1 when a solve or simulation
finished but reported violations, 2 for configuration errors, 3 for
geometry errors and 4 for solver errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import check_apriori, epoch_decomposition, jump_bound_check, ratio_stability
from .errors import ConfigError, GeometryError, ProjectionError, SkorohodError, SolverError
from .paths import TimeGrid
from .scenarios import TASKS, load_scenario, scenario_catalogue
from .sde import euler_reflected, monte_carlo
from .solver import SkorohodProblem, refine_solve, solve

EXIT_OK, EXIT_VIOLATIONS, EXIT_CONFIG, EXIT_GEOMETRY, EXIT_SOLVER = 0, 1, 2, 3, 4


def _finite(obj):
    """Replace non-finite floats so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_finite(payload), indent=2, sort_keys=True) + "\n")


def _parse_levels(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return int(lo), int(hi)
        return int(text), int(text)
    except ValueError:
        raise ConfigError(f"levels must look like 'n' or 'a..b', got {text!r}") from None


def _levels(args, scenario) -> tuple[int, int]:
    if args.levels:
        return _parse_levels(args.levels)
    if args.level is not None:
        return args.level, args.level
    if "level" in scenario.raw and "levels" not in scenario.raw:
        n = int(scenario.raw["level"])
        return n, n
    return scenario.levels


def _problem(scenario, seed):
    return SkorohodProblem(scenario.domain, scenario.cone, scenario.driver(seed), scenario.budget())


def _write_solution(out: Path, solution) -> None:
    solution.x.to_csv(out / "x.csv")
    solution.reflection.lambda_path().to_csv(out / "lambda.csv")


def _solution_summary(problem, solution) -> dict:
    estimates = check_apriori(problem, solution)
    jumps = jump_bound_check(problem, solution)
    return {
        "level": int(round(math.log2(solution.grid.steps))),
        "diagnostics": solution.diagnostics.to_json(),
        "epochs": [e.to_json() for e in epoch_decomposition(solution, problem.budget)],
        "estimates": {"passed": estimates.passed, "windows": len(estimates.windows),
                      "failures": [w.to_json() for w in estimates.failures],
                      "constants": estimates.constants, "ratios": estimates.ratios},
        "jumps": jumps.to_json(),
        "total_variation": float(solution.reflection.total_variation[-1]),
    }, estimates, jumps


def _clean(summary) -> bool:
    return not summary["diagnostics"]["violations"] and summary["estimates"]["passed"] \
        and not summary["jumps"]["violations"]


def run_solve(scenario, args, out: Path) -> int:
    problem = _problem(scenario, args.seed)
    lo, hi = _levels(args, scenario)
    summaries, ok = [], True
    for n in range(lo, hi + 1):
        sol = solve(problem, TimeGrid.dyadic(scenario.horizon, n), tol=args.tol)
        summary, _, _ = _solution_summary(problem, sol)
        summaries.append(summary)
        ok &= _clean(summary)
    _write_solution(out, sol)
    _write_json(out / "diagnostics.json", {"scenario": scenario.name, "budget": problem.budget.to_json(),
                                           "levels": summaries, "passed": ok})
    return EXIT_OK if ok else EXIT_VIOLATIONS


def run_refine(scenario, args, out: Path) -> int:
    problem = _problem(scenario, args.seed)
    lo, hi = _levels(args, scenario)
    solutions, report = refine_solve(problem, lo, hi, tol=args.tol)
    summaries = [_solution_summary(problem, s)[0] for s in solutions]
    ok = all(_clean(s) for s in summaries)
    _write_solution(out, solutions[-1])
    _write_json(out / "diagnostics.json", {"scenario": scenario.name, "budget": problem.budget.to_json(),
                                           "levels": summaries, "passed": ok})
    _write_json(out / "report.json", {"scenario": scenario.name, "refinement": report.to_json(),
                                      "passed": ok and report.monotone})
    return EXIT_OK if ok and report.monotone else EXIT_VIOLATIONS


def run_check(scenario, args, out: Path) -> int:
    problem = _problem(scenario, args.seed)
    lo, hi = _levels(args, scenario)
    reports, per_level, ok = [], [], True
    for n in range(lo, hi + 1):
        sol = solve(problem, TimeGrid.dyadic(scenario.horizon, n), tol=args.tol)
        summary, estimates, jumps = _solution_summary(problem, sol)
        reports.append(estimates)
        entry = estimates.to_json()
        entry.update(level=n, jumps=jumps.to_json(), violations=sol.diagnostics.violations)
        per_level.append(entry)
        ok &= _clean(summary)
    _write_solution(out, sol)
    _write_json(out / "report.json", {"scenario": scenario.name, "budget": problem.budget.to_json(),
                                      "levels": per_level, "stability": ratio_stability(reports),
                                      "passed": ok})
    return EXIT_OK if ok else EXIT_VIOLATIONS


def run_sde(scenario, args, out: Path) -> int:
    coeffs, z0 = scenario.sde()
    budget = scenario.budget()
    level = _levels(args, scenario)[1]
    paths = args.paths if args.paths is not None else int(scenario.raw.get("paths", 1000))
    stat = args.stat or scenario.raw.get("stat", "terminal")
    result = monte_carlo(coeffs, scenario.domain, scenario.cone, z0, level, paths, args.seed, stat,
                         budget=budget)
    _write_json(out / "stats.json", {"scenario": scenario.name, **result.to_json()})
    for p in range(min(args.write_paths, paths)):
        path = euler_reflected(coeffs, scenario.domain, scenario.cone, z0, level, args.seed, path=p,
                               budget=budget)
        path.X.to_csv(out / f"path_{p}_x.csv")
        path.reflection.lambda_path().to_csv(out / f"path_{p}_lambda.csv")
    return EXIT_OK if result.violations == 0 else EXIT_VIOLATIONS


def run_measure(scenario, args, out: Path) -> int:
    budget = scenario.budget()
    _write_json(out / "budget.json", {"scenario": scenario.name, **budget.to_json()})
    return EXIT_OK


RUNNERS = {"solve": run_solve, "refine": run_refine, "check": run_check, "sde": run_sde,
           "measure": run_measure}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skorohod", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="print the built-in scenario names")
    for name in TASKS + ("run",):
        p = sub.add_parser(name, help="run the scenario's own task" if name == "run" else f"{name} task")
        p.add_argument("--scenario", required=True, help="scenario JSON file or catalogue name")
        p.add_argument("--out", default=None, help="output directory (default: ./out/<scenario>)")
        p.add_argument("--level", type=int, default=None, help="single dyadic level")
        p.add_argument("--levels", default=None, help="level range 'a..b'")
        p.add_argument("--paths", type=int, default=None, help="Monte Carlo path count")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--stat", default=None, help="Monte Carlo statistic")
        p.add_argument("--tol", type=float, default=1e-10, help="validation tolerance")
        p.add_argument("--write-paths", type=int, default=0,
                       help="sde: also write the first K paths as CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(scenario_catalogue()))
        return EXIT_OK
    try:
        scenario = load_scenario(args.scenario)
        if args.seed is None:
            args.seed = scenario.seed
        task = scenario.task if args.command == "run" else args.command
        out = Path(args.out) if args.out else Path("out") / scenario.name
        out.mkdir(parents=True, exist_ok=True)
        code = RUNNERS[task](scenario, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (SolverError, ProjectionError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SkorohodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{task} {scenario.name}: {'ok' if code == EXIT_OK else 'violations'} -> {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
