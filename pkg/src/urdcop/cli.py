"""Command line interface: ``urdcop gen|solve|regret|eval|bench``.

Exit codes: 0 on success, 1 for usage and input errors, 2 when a solver
fails. The log level is read from ``URDCOP_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import io
from .bench import BenchConfig, GenParams, evaluate_average_regret, format_table, generate_instance, run_benchmark
from .estimators import SOLVERS, make_solver
from .factor_graph import CyclicGraphError, build_factor_graph
from .icg import DEFAULT_MAX_ITER, IterationLimitError, SolverTimeout, solve_subproblem
from .model import InstanceError
from .reference import ENUMERATION_GUARD, EnumerationGuardError, max_regret_oracle

logger = logging.getLogger("urdcop")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="urdcop", description="Minimax-regret UR-DCOP solving with ICG-Max-Sum.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a random task-allocation instance")
    gen.add_argument("--tasks", type=int, required=True)
    gen.add_argument("--agents", type=int)
    gen.add_argument("--states", type=int, required=True)
    gen.add_argument("--topology", choices=["tree", "random"], default="tree")
    gen.add_argument("--max-scope", type=int, default=3)
    gen.add_argument("--spread", choices=["variance", "std"], default="variance",
                     help="read the drawn spread as a variance or a standard deviation")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)

    solve = sub.add_parser("solve", help="solve an instance")
    solve.add_argument("--algo", choices=sorted(SOLVERS), required=True)
    solve.add_argument("--in", dest="inp", type=Path, required=True)
    solve.add_argument("--out", type=Path, required=True)
    solve.add_argument("--allow-cycles", action="store_true")
    solve.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITER)
    solve.add_argument("--mode", choices=["pareto", "single", "dual"], default="pareto",
                       help="icg-maxsum: master solver")
    solve.add_argument("--dual-iters", type=int, default=20, help="icg-maxsum: pricing rounds per master")
    solve.add_argument("--extra-cuts", type=int, default=0, help="icg-maxsum: extra subproblems per iteration")
    solve.add_argument("--time-limit", type=float)
    solve.add_argument("--seed", type=int, default=0, help="dsa: random seed")

    regret = sub.add_parser("regret", help="maximum regret of a stored solution")
    regret.add_argument("--in", dest="inp", type=Path, required=True)
    regret.add_argument("--solution", type=Path, required=True)

    ev = sub.add_parser("eval", help="average regret over random task states")
    ev.add_argument("--in", dest="inp", type=Path, required=True)
    ev.add_argument("--solution", type=Path, required=True)
    ev.add_argument("--runs", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)

    bench = sub.add_parser("bench", help="run a benchmark configuration")
    bench.add_argument("--config", type=Path, required=True)
    bench.add_argument("--out", type=Path, required=True)
    return parser


def _load(path: Path):
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    return io.load_instance(path)


def cmd_gen(args) -> int:
    params = GenParams(
        num_tasks=args.tasks, num_agents=args.agents, num_states=args.states,
        max_scope=args.max_scope, topology=args.topology, spread=args.spread, seed=args.seed,
    )
    try:
        gen = generate_instance(params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    io.save_instance(gen.instance, args.out)
    io.save_states(gen.true_states, io.states_path(args.out), gen.instance)
    inst = gen.instance
    print(f"{inst.name}: {inst.num_agents} agents, {inst.num_constraints} tasks -> {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = _load(args.inp)
    params = {"time_limit": args.time_limit}
    if args.algo in ("icg-maxsum", "icg-exact"):
        params["max_iter"] = args.max_iters
    if args.algo == "icg-maxsum":
        params.update(
            allow_cycles=args.allow_cycles, mode=args.mode,
            dual_iters=args.dual_iters, extra_cuts=args.extra_cuts,
        )
    if args.algo == "dsa":
        params["seed"] = args.seed
    solver = make_solver(args.algo, **params).fit(instance)
    doc = io.solution_to_dict(
        instance, solver.assignment_, algorithm=args.algo, regret=solver.regret_,
        max_regret=solver.max_regret_, iterations=getattr(solver.result_, "iterations", ()),
    )
    io.save_solution(doc, args.out)
    print(f"{args.algo}: regret {solver.regret_:.17g} ({solver.n_iter_} iterations, "
          f"{solver.n_witnesses_} witnesses) -> {args.out}")
    return EXIT_OK


def cmd_regret(args) -> int:
    instance = _load(args.inp)
    x, _ = io.load_solution(args.solution, instance)
    if instance.joint_space_size() <= ENUMERATION_GUARD:
        value, source = max_regret_oracle(instance, x).regret, "oracle"
    else:
        graph = build_factor_graph(instance)
        _, value = solve_subproblem(graph, instance, x)
        source = "max-sum"
    print(json.dumps({"max_regret": value, "source": source}))
    return EXIT_OK


def cmd_eval(args) -> int:
    instance = _load(args.inp)
    x, _ = io.load_solution(args.solution, instance)
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    report = evaluate_average_regret(instance, x, runs=args.runs, seed=args.seed)
    print(json.dumps({
        "runs": report.runs, "seed": report.seed, "mean": report.mean,
        "std": report.std, "regrets": report.regrets,
    }))
    return EXIT_OK


def cmd_bench(args) -> int:
    if not args.config.is_file():
        raise UsageError(f"no such file: {args.config}")
    try:
        config = BenchConfig.from_dict(json.loads(args.config.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.config}: {exc}") from exc
    records = run_benchmark(config)
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(format_table(records))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "regret": cmd_regret, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    level = os.environ.get("URDCOP_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, io.FormatError, InstanceError, FileNotFoundError) as exc:
        print(f"urdcop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CyclicGraphError, SolverTimeout, IterationLimitError, EnumerationGuardError) as exc:
        print(f"urdcop: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
