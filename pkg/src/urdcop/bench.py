"""Random task-allocation instances, average-regret evaluation and benchmarks.

Randomness comes from numpy's PCG64 bit generator, so instances depend only
on the parameters and the seed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .factor_graph import build_factor_graph
from .icg import SolverTimeout
from .maxsum import solve_dcop
from .model import Constraint, Instance, check_assignment, check_instance, deterministic_value
from .reference import ENUMERATION_GUARD, EnumerationGuardError, _argmax_sum, _local_functions

logger = logging.getLogger(__name__)

MEAN_RANGE = (80.0, 100.0)
VARIANCE_RANGE = (0.0, 80.0)
MAX_ATTEMPTS = 100


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenParams:
    num_tasks: int
    num_states: int = 2
    num_agents: int | None = None
    max_scope: int = 3
    topology: Literal["tree", "random"] = "tree"
    extra_links: int | None = None
    seed: int = 0
    # how the drawn spread value is read: as a variance, or as a standard deviation
    spread: Literal["variance", "std"] = "variance"

    @property
    def agents(self) -> int:
        # |A| = |T|/2, rounded up so one task still yields one agent
        return self.num_agents if self.num_agents is not None else math.ceil(self.num_tasks / 2)

    def validate(self) -> None:
        if self.num_tasks < 1 or self.agents < 1 or self.num_states < 1:
            raise ValueError("num_tasks, num_agents and num_states must be >= 1")
        if self.max_scope < 1:
            raise ValueError("max_scope must be >= 1")
        if self.topology not in ("tree", "random"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.spread not in ("variance", "std"):
            raise ValueError(f"unknown spread reading {self.spread!r}")
        if self.agents > self.num_tasks * self.max_scope:
            raise ValueError("too many agents for the tasks' scope capacity")


@dataclass
class GeneratedInstance:
    instance: Instance
    true_states: tuple[int, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]


def _links(params: GenParams, rng: np.random.Generator) -> list[list[int]] | None:
    """Task scopes as lists of agents; ``None`` when the draw got stuck."""
    n, m, cap = params.agents, params.num_tasks, params.max_scope
    scopes: list[list[int]] = [[] for _ in range(m)]
    agent_tasks: list[list[int]] = [[] for _ in range(n)]
    tasks = rng.permutation(m)
    agents = rng.permutation(n)
    # every task gets one owner; the first min(n, m) tasks cover distinct agents
    for k, t in enumerate(tasks):
        a = int(agents[k]) if k < n else int(rng.integers(n))
        scopes[t].append(a)
        agent_tasks[a].append(int(t))
    # join the stars into one tree, attaching each agent in turn to an open
    # task already reachable from the first agent
    order = rng.permutation(n)
    joined_tasks = list(agent_tasks[int(order[0])])
    for a in order[1:]:
        a = int(a)
        open_tasks = [t for t in joined_tasks if len(scopes[t]) < cap]
        if not open_tasks:
            return None
        t = open_tasks[int(rng.integers(len(open_tasks)))]
        scopes[t].append(a)
        agent_tasks[a].append(t)
        joined_tasks.extend(agent_tasks[a][:-1])
    if params.topology == "random":
        extra = params.extra_links if params.extra_links is not None else max(1, m // 4)
        for _ in range(extra):
            for _attempt in range(20):
                t, a = int(rng.integers(m)), int(rng.integers(n))
                if a not in scopes[t] and len(scopes[t]) < cap:
                    scopes[t].append(a)
                    agent_tasks[a].append(t)
                    break
    if any(not d for d in agent_tasks):
        return None
    return [sorted(s) for s in scopes]


def generate_instance(params: GenParams) -> GeneratedInstance:
    """Random task allocation instance plus its hidden true task states.

    Agent ``i`` may perform the tasks it is linked to, so its domain is that
    list of tasks. Task ``j`` draws a mean from [80, 100] and a variance from
    [0, 80]; every joint choice of its scope in which at least one agent picks
    ``j`` gets a base utility from that Gaussian plus an independent per-state
    perturbation with the same variance. Choices with no agent on ``j`` are
    worth 0. With ``spread="std"`` the value drawn from [0, 80] is taken as
    the standard deviation instead; ``variances`` always holds the variance.
    """
    params.validate()
    rng = np.random.Generator(np.random.PCG64(params.seed))
    for _ in range(MAX_ATTEMPTS):
        scopes = _links(params, rng)
        if scopes is not None:
            break
    else:
        raise GenerationError(f"no feasible topology after {MAX_ATTEMPTS} attempts")

    n, m, S = params.agents, params.num_tasks, params.num_states
    domains = [[] for _ in range(n)]
    for t, scope in enumerate(scopes):
        for a in scope:
            domains[a].append(t)
    domains = [sorted(d) for d in domains]

    means, variances, constraints = [], [], []
    for t, scope in enumerate(scopes):
        mu = float(rng.uniform(*MEAN_RANGE))
        drawn = float(rng.uniform(*VARIANCE_RANGE))
        var = drawn if params.spread == "variance" else drawn * drawn
        sd = math.sqrt(var)
        dims = [len(domains[a]) for a in scope]
        # which joint choices put at least one scope agent on task t
        busy = np.zeros(dims, dtype=bool)
        for p, a in enumerate(scope):
            shape = [1] * len(dims)
            shape[p] = dims[p]
            busy |= (np.array(domains[a]) == t).reshape(shape)
        base = rng.normal(mu, sd, size=dims)
        noise = rng.normal(0.0, sd, size=(S, *dims))
        table = np.where(busy, base + noise, 0.0)
        means.append(mu)
        variances.append(var)
        constraints.append(Constraint(t, tuple(scope), S, table))
    true_states = tuple(int(s) for s in rng.integers(S, size=m))

    instance = Instance(
        agents=tuple(f"a{i}" for i in range(n)),
        domains=tuple(tuple(f"t{t}" for t in d) for d in domains),
        constraints=tuple(constraints),
        name=f"gen-T{m}-A{n}-S{S}-{params.topology}-seed{params.seed}",
    )
    return GeneratedInstance(instance, true_states, tuple(means), tuple(variances))


def optimal_value(instance: Instance, states: Sequence[int], graph=None, guard=ENUMERATION_GUARD) -> float:
    """Best team value once the task states are revealed."""
    graph = graph or build_factor_graph(instance)
    utilities = [t[s] for t, s in zip(instance.tables, states)]
    if graph.acyclic:
        _, value = solve_dcop(graph, utilities, domain_sizes=instance.domain_sizes)
        return value
    if instance.joint_space_size() > guard:
        raise EnumerationGuardError("cyclic instance too large for exact evaluation")
    local = _local_functions(instance, lambda j, xj: float(utilities[j][xj]))
    return float(_argmax_sum(instance, local)[1])


@dataclass
class EvalReport:
    regrets: list[float]
    mean: float
    std: float
    runs: int
    seed: int


def evaluate_average_regret(
    instance: Instance, x: Sequence[int], *, runs: int = 100, seed: int = 0
) -> EvalReport:
    """Average gap to the state-aware optimum over uniformly drawn task states."""
    check_instance(instance)
    x = check_assignment(instance, x)
    if runs < 1:
        raise ValueError("runs must be >= 1")
    graph = build_factor_graph(instance)
    rng = np.random.Generator(np.random.PCG64(seed))
    regrets = []
    for _ in range(runs):
        states = [int(rng.integers(c.num_states)) for c in instance.constraints]
        gap = optimal_value(instance, states, graph) - deterministic_value(instance, states, x)
        # Max-Sum and the direct sum add in different orders
        regrets.append(max(gap, 0.0) if gap > -1e-9 else gap)
    arr = np.array(regrets)
    return EvalReport(regrets, float(arr.mean()), float(arr.std()), runs, seed)


def instance_hash(instance: Instance) -> str:
    from .io import instance_to_dict

    text = json.dumps(instance_to_dict(instance), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class BenchConfig:
    algorithms: list[str] = field(default_factory=lambda: ["icg-maxsum", "dsa"])
    sizes: list[dict] = field(default_factory=lambda: [{"tasks": 8, "states": 2}])
    seeds: list[int] = field(default_factory=lambda: [0])
    time_limit: float | None = 600.0
    eval_runs: int = 100
    topology: str = "tree"
    # extra constructor parameters per algorithm name
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> BenchConfig:
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown benchmark config keys {sorted(unknown)}")
        return cls(**known)


def run_benchmark(config: BenchConfig | dict) -> list[dict]:
    """One record per (size, seed, algorithm); every algorithm sees the same instance."""
    from .estimators import make_solver

    if isinstance(config, dict):
        config = BenchConfig.from_dict(config)
    records = []
    for size_idx, size in enumerate(config.sizes):
        for seed in config.seeds:
            params = GenParams(
                num_tasks=int(size["tasks"]),
                num_agents=size.get("agents"),
                num_states=int(size.get("states", 2)),
                max_scope=int(size.get("max_scope", 3)),
                topology=size.get("topology", config.topology),
                spread=size.get("spread", "variance"),
                seed=int(seed),
            )
            gen = generate_instance(params)
            inst = gen.instance
            digest = instance_hash(inst)
            eval_seed = int(np.random.SeedSequence([seed, size_idx]).generate_state(1)[0])
            for algo in config.algorithms:
                rec = {
                    "algorithm": algo,
                    "tasks": params.num_tasks,
                    "agents": params.agents,
                    "states": params.num_states,
                    "seed": seed,
                    "instance_hash": digest,
                    "status": "ok",
                    "time_s": None,
                    "regret": None,
                    "mean_eval_regret": None,
                    "iterations": None,
                    "witnesses": None,
                }
                solver = make_solver(algo, time_limit=config.time_limit, **config.params.get(algo, {}))
                t0 = time.perf_counter()
                try:
                    solver.fit(inst)
                except SolverTimeout:
                    rec["time_s"] = time.perf_counter() - t0
                    rec["status"] = "timeout"
                    records.append(rec)
                    continue
                except Exception as exc:  # recorded per cell, the run continues
                    rec["time_s"] = time.perf_counter() - t0
                    rec["status"] = f"error: {exc}"
                    records.append(rec)
                    continue
                rec["time_s"] = time.perf_counter() - t0
                rec["regret"] = float(solver.regret_)
                rec["iterations"] = solver.n_iter_
                rec["witnesses"] = solver.n_witnesses_
                report = evaluate_average_regret(
                    inst, solver.assignment_, runs=config.eval_runs, seed=eval_seed
                )
                rec["mean_eval_regret"] = report.mean
                records.append(rec)
    return records


def format_table(records: Sequence[dict]) -> str:
    cols = ["algorithm", "agents", "tasks", "states", "seed", "status", "time_s",
            "regret", "mean_eval_regret", "iterations", "witnesses"]

    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4g}" if not math.isnan(v) else "nan"
        return "-" if v is None else str(v)

    rows = [[fmt(r.get(c)) for c in cols] for r in records]
    widths = [max(len(c), *(len(row[k]) for row in rows)) if rows else len(c) for k, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)
