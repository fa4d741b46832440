"""Exhaustive oracles and the two baselines (centralised ICG, DSA).

The oracles enumerate joint assignments with plain Python loops over
``itertools.product``. They deliberately share no code with the message
passing solvers so they can serve as an independent check. Beliefs are
searched over simplex vertices only: every objective here is linear in each
constraint's belief.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .factor_graph import build_factor_graph
from .icg import (
    TOL,
    DEFAULT_MAX_ITER,
    SolverTimeout,
    SolveResult,
    WitnessPoint,
    icg_loop,
    solve_subproblem,
)
from .model import (
    NEG_INFINITY,
    Assignment,
    Instance,
    check_assignment,
    check_instance,
    point_mass,
)

logger = logging.getLogger(__name__)

ENUMERATION_GUARD = 10**7


class EnumerationGuardError(RuntimeError):
    pass


@dataclass
class OracleResult:
    assignment: Assignment
    regret: float
    witness: WitnessPoint | None = None
    info: dict = field(default_factory=dict)


def _guard(instance: Instance, guard: int = ENUMERATION_GUARD) -> None:
    size = instance.joint_space_size()
    if size > guard:
        raise EnumerationGuardError(
            f"{size} joint assignments exceed the enumeration guard of {guard}"
        )


def _joint_assignments(instance: Instance):
    return itertools.product(*(range(d) for d in instance.domain_sizes))


def _lists(instance: Instance):
    return [t.tolist() for t in instance.tables], [c.scope for c in instance.constraints]


def _lookup(nested, idx):
    for k in idx:
        nested = nested[k]
    return nested


def _local_functions(instance: Instance, fn):
    """Evaluate ``fn(j, xj)`` over every partial assignment of every scope."""
    out = []
    for j, c in enumerate(instance.constraints):
        dims = [instance.domain_sizes[a] for a in c.scope]
        out.append({xj: fn(j, xj) for xj in itertools.product(*map(range, dims))})
    return out


def _argmax_sum(instance, local, deadline=None):
    """Lowest-lexicographic maximiser of ``sum_j local[j][x_j]``."""
    scopes = [c.scope for c in instance.constraints]
    best_x, best_v = None, -math.inf
    for count, x in enumerate(_joint_assignments(instance)):
        v = sum(f[tuple(x[a] for a in s)] for f, s in zip(local, scopes))
        if v > best_v:
            best_x, best_v = x, v
        if deadline is not None and count % 20000 == 0 and time.perf_counter() > deadline:
            raise SolverTimeout("enumeration exceeded the time limit")
    return best_x, best_v


def enumerate_optimal(
    instance: Instance, beliefs: Sequence, *, guard: int = ENUMERATION_GUARD
) -> tuple[Assignment, float]:
    """Exhaustive maximiser of the expected value under ``beliefs``."""
    check_instance(instance)
    _guard(instance, guard)
    tables, scopes = _lists(instance)
    beliefs = [list(map(float, b)) for b in beliefs]
    if len(beliefs) != instance.num_constraints:
        raise ValueError("one belief per constraint is required")

    def expected(j, xj):
        return sum(p * _lookup(tables[j][s], xj) for s, p in enumerate(beliefs[j]))

    return _argmax_sum(instance, _local_functions(instance, expected))


def _regret_locals(instance: Instance, x: Sequence[int]):
    """Per-constraint ``max_s U(s, x'_j) - U(s, x_j)`` with its maximising state."""
    tables, scopes = _lists(instance)

    def best_state(j, xj):
        ref = tuple(x[a] for a in scopes[j])
        diffs = [
            _lookup(tables[j][s], xj) - _lookup(tables[j][s], ref)
            for s in range(instance.constraints[j].num_states)
        ]
        s = max(range(len(diffs)), key=lambda k: (diffs[k], -k))
        return diffs[s], s

    return _local_functions(instance, best_state)


def max_regret_oracle(
    instance: Instance, x: Sequence[int], *, guard: int = ENUMERATION_GUARD, deadline=None
) -> OracleResult:
    """Maximum regret of ``x`` over all beliefs, with the witness attaining it."""
    check_instance(instance)
    _guard(instance, guard)
    x = check_assignment(instance, x)
    both = _regret_locals(instance, x)
    values = [{k: v[0] for k, v in f.items()} for f in both]
    xstar, regret = _argmax_sum(instance, values, deadline)
    beliefs = tuple(
        point_mass(c.num_states, both[j][tuple(xstar[a] for a in c.scope)][1])
        for j, c in enumerate(instance.constraints)
    )
    return OracleResult(x, float(regret), WitnessPoint(beliefs, tuple(xstar)))


def minimax_oracle(instance: Instance, *, guard: int = ENUMERATION_GUARD) -> OracleResult:
    """Assignment minimising the maximum regret, by full enumeration."""
    check_instance(instance)
    _guard(instance, guard)
    best = None
    for x in _joint_assignments(instance):
        res = max_regret_oracle(instance, x, guard=guard)
        if best is None or res.regret < best.regret:
            best = res
    return best


def centralized_icg(
    instance: Instance,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = TOL,
    guard: int = ENUMERATION_GUARD,
    time_limit: float | None = None,
) -> SolveResult:
    """ICG with master and subproblem both solved by exhaustive search."""
    check_instance(instance)
    _guard(instance, guard)
    deadline = None if time_limit is None else time.perf_counter() + time_limit
    scopes = [c.scope for c in instance.constraints]
    tables, _ = _lists(instance)
    columns: list[list[float]] = []  # per witness, regret of every joint assignment
    space = list(_joint_assignments(instance))

    def regret_column(w: WitnessPoint) -> list[float]:
        def expected(j, xj):
            return sum(p * _lookup(tables[j][s], xj) for s, p in enumerate(w.beliefs[j]))

        local = _local_functions(instance, expected)
        star = sum(f[tuple(w.solution[a] for a in s)] for f, s in zip(local, scopes))
        return [
            star - sum(f[tuple(x[a] for a in s)] for f, s in zip(local, scopes))
            for x in space
        ]

    def master(witnesses, _tables):
        if not witnesses:
            return space[0], NEG_INFINITY
        while len(columns) < len(witnesses):
            columns.append(regret_column(witnesses[len(columns)]))
        best_k, best_v = 0, math.inf
        for k in range(len(space)):
            v = max(col[k] for col in columns)
            if v < best_v:
                best_k, best_v = k, v
        if deadline is not None and time.perf_counter() > deadline:
            raise SolverTimeout("enumeration exceeded the time limit")
        return space[best_k], best_v

    def subproblem(x):
        res = max_regret_oracle(instance, x, guard=guard, deadline=deadline)
        return res.witness, res.regret

    return icg_loop(
        instance, master, subproblem,
        algorithm="icg-exact", max_iter=max_iter, tol=tol, time_limit=time_limit,
    )


# -- DSA baseline ---------------------------------------------------------


def dsa_b(
    instance: Instance,
    local: Sequence[np.ndarray],
    x0: Sequence[int],
    *,
    p: float,
    iters: int,
    rng: np.random.Generator,
) -> Assignment:
    """Synchronous DSA-B maximising ``sum_j local[j][x_j]``.

    Each round every agent computes its best response to its neighbours'
    previous values and adopts it with probability ``p`` when it strictly
    improves or, being a different value, ties the current one.
    """
    x = list(x0)
    scopes = [c.scope for c in instance.constraints]
    touching = [[] for _ in range(instance.num_agents)]
    for j, s in enumerate(scopes):
        for pos, a in enumerate(s):
            touching[a].append((j, pos))
    for _ in range(iters):
        proposal = list(x)
        for i in range(instance.num_agents):
            gains = np.zeros(instance.domain_sizes[i])
            for j, pos in touching[i]:
                idx = [x[a] for a in scopes[j]]
                idx[pos] = slice(None)
                gains += local[j][tuple(idx)]
            best = int(np.argmax(gains))
            delta = gains[best] - gains[x[i]]
            if delta > 0 or (best != x[i] and delta == 0):
                if rng.random() < p:
                    proposal[i] = best
        x = proposal
    return tuple(x)


def dsa_minimax(
    instance: Instance,
    *,
    p: float = 0.6,
    inner_iters: int = 50,
    outer_iters: int = 20,
    seed: int = 0,
    guard: int = ENUMERATION_GUARD,
) -> OracleResult:
    """Alternating DSA local search for the min-max-max regret problem.

    Each outer step runs DSA for the witness assignment against the current
    candidate (beliefs folded into the utilities at their best vertex), then
    DSA for a new candidate maximising expected value under the worst known
    witness's beliefs. The candidate with the lowest regret over the known
    witnesses is returned.
    """
    check_instance(instance)
    rng = np.random.Generator(np.random.PCG64(seed))
    tables = instance.tables
    x = tuple(int(rng.integers(d)) for d in instance.domain_sizes)
    witnesses: list[WitnessPoint] = []
    expected_tables: list[list[np.ndarray]] = []
    candidates: list[Assignment] = []

    def witness_regret(x, w, exp):
        return sum(
            e[instance.restrict(w.solution, j)] - e[instance.restrict(x, j)]
            for j, e in enumerate(exp)
        )

    for _ in range(outer_iters):
        regret_local = []
        for j, t in enumerate(tables):
            ref = t[(slice(None),) + instance.restrict(x, j)]
            regret_local.append((t - ref.reshape((-1,) + (1,) * (t.ndim - 1))).max(axis=0))
        xstar = dsa_b(instance, regret_local, x, p=p, iters=inner_iters, rng=rng)
        beliefs = []
        for j, t in enumerate(tables):
            diff = t[(slice(None),) + instance.restrict(xstar, j)] - t[(slice(None),) + instance.restrict(x, j)]
            beliefs.append(point_mass(t.shape[0], int(np.argmax(diff))))
        w = WitnessPoint(tuple(beliefs), xstar)
        witnesses.append(w)
        expected_tables.append([np.tensordot(b, t, axes=(0, 0)) for b, t in zip(beliefs, tables)])
        candidates.append(x)

        worst = max(
            range(len(witnesses)),
            key=lambda g: witness_regret(x, witnesses[g], expected_tables[g]),
        )
        x = dsa_b(instance, expected_tables[worst], x, p=p, iters=inner_iters, rng=rng)

    candidates.append(x)
    scores = [
        max(witness_regret(c, w, e) for w, e in zip(witnesses, expected_tables))
        for c in candidates
    ]
    chosen = candidates[int(np.argmin(scores))]

    if instance.joint_space_size() <= guard:
        res = max_regret_oracle(instance, chosen, guard=guard)
        regret, witness, source = res.regret, res.witness, "oracle"
    else:
        graph = build_factor_graph(instance)
        witness, regret = solve_subproblem(graph, instance, chosen, allow_cycles=True)
        source = "subproblem"
    return OracleResult(
        chosen, regret, witness,
        info={"regret_source": source, "estimated_regret": float(min(scores))},
    )
