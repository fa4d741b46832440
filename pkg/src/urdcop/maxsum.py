"""Scalar Max-Sum on factor graphs.

The message schedule is synchronous flooding: in every round each node
recomputes its outgoing messages from the previous round's incoming ones. A
node whose inputs did not change is skipped, which gives the same messages as
full flooding at a fraction of the cost once the graph settles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .factor_graph import (
    DEFAULT_MAX_ROUNDS,
    CyclicGraphError,
    FactorGraph,
    PropagationTree,
    message_rounds,
)

logger = logging.getLogger(__name__)

CYCLIC_MESSAGE = "cyclic factor graph: exactness not guaranteed"


def flood(
    graph: FactorGraph,
    rounds: int,
    initial: Callable[[int], object],
    variable_update: Callable[[int, int, list], object],
    function_update: Callable[[int, int, dict], object],
    same: Callable[[object, object], bool],
):
    """Run ``rounds`` synchronous rounds of generic message passing.

    ``variable_update(i, j, incoming)`` builds ``q[i, j]`` from the messages
    ``r[k, i]`` for ``k`` in ``M(i) \\ j``. ``function_update(j, pos, incoming)``
    builds ``r[j, N(j)[pos]]`` from ``{p: q[N(j)[p], j]}`` over the other scope
    positions. Returns ``(q, r, rounds_run)``.
    """
    q = {(i, j): initial(i) for i, j in graph.edges()}
    r = {(j, i): initial(i) for i, j in graph.edges()}
    dirty_vars = set(range(graph.num_variables))
    dirty_funcs = set(range(graph.num_functions))
    done = 0
    for _ in range(rounds):
        if not dirty_vars and not dirty_funcs:
            break
        done += 1
        q_new, r_new = {}, {}
        for i in sorted(dirty_vars):
            funcs = graph.var_neighbors[i]
            for j in funcs:
                msg = variable_update(i, j, [r[k, i] for k in funcs if k != j])
                if not same(msg, q[i, j]):
                    q_new[i, j] = msg
        for j in sorted(dirty_funcs):
            scope = graph.func_neighbors[j]
            for pos, i in enumerate(scope):
                incoming = {p: q[k, j] for p, k in enumerate(scope) if p != pos}
                msg = function_update(j, pos, incoming)
                if not same(msg, r[j, i]):
                    r_new[j, i] = msg
        q.update(q_new)
        r.update(r_new)
        dirty_funcs = {j for _, j in q_new}
        dirty_vars = {i for _, i in r_new}
    return q, r, done


def sweep(
    graph: FactorGraph,
    tree: PropagationTree,
    variable_update: Callable[[int, int, list], object],
    function_update: Callable[[int, int, dict], object],
):
    """Every message of a forest computed once, leaves to roots then back.

    Each message depends only on the subtree behind it, so this yields exactly
    the messages flooding settles to, with ``variable_update`` and
    ``function_update`` as in :func:`flood`. Returns ``(q, r)``.
    """
    n = graph.num_variables
    q, r = {}, {}

    def send(u, v):
        if u < n:
            j = v - n
            q[u, j] = variable_update(u, j, [r[k, u] for k in graph.var_neighbors[u] if k != j])
        else:
            j = u - n
            scope = graph.func_neighbors[j]
            pos = scope.index(v)
            r[j, v] = function_update(j, pos, {p: q[k, j] for p, k in enumerate(scope) if p != pos})

    for u in reversed(tree.order):
        if tree.parent[u] is not None:
            send(u, tree.parent[u])
    for u in tree.order:
        for c in tree.children[u]:
            send(u, c)
    return q, r


def variable_message(incoming: Sequence[np.ndarray], domain_size: int | None = None) -> np.ndarray:
    """Sum of incoming function messages, shifted to sum to zero over the domain."""
    if not incoming:
        if domain_size is None:
            raise ValueError("domain_size is required when there are no incoming messages")
        return np.zeros(domain_size)
    sizes = {len(m) for m in incoming}
    if len(sizes) != 1 or (domain_size is not None and sizes != {domain_size}):
        raise ValueError("payload domain mismatch")
    total = np.sum(incoming, axis=0)
    return total - total.mean()


def function_message(
    utility: np.ndarray, target: int, incoming: Mapping[int, np.ndarray]
) -> np.ndarray:
    """Max over completions of ``utility + sum(incoming)`` as a function of ``target``.

    ``utility`` is indexed by the scope in order; ``target`` and the keys of
    ``incoming`` are scope positions.
    """
    utility = np.asarray(utility, dtype=float)
    k = utility.ndim
    others = [p for p in range(k) if p != target]
    if set(incoming) != set(others):
        raise ValueError(f"missing incoming message for scope positions {sorted(set(others) - set(incoming))}")
    total = utility
    for p in others:
        shape = [1] * k
        shape[p] = utility.shape[p]
        total = total + np.asarray(incoming[p]).reshape(shape)
    if not others:
        return total.copy()
    return total.max(axis=tuple(others))


def marginal(incoming: Sequence[np.ndarray], domain_size: int | None = None) -> np.ndarray:
    if not incoming:
        return np.zeros(domain_size)
    return np.sum(incoming, axis=0)


@dataclass
class MaxSumRun:
    q: dict
    r: dict
    marginals: list[np.ndarray]
    assignment: tuple[int, ...]
    rounds: int


def run_maxsum(
    graph: FactorGraph,
    utilities: Sequence[np.ndarray],
    *,
    domain_sizes: Sequence[int] | None = None,
    allow_cycles: bool = False,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> MaxSumRun:
    if len(utilities) != graph.num_functions:
        raise ValueError("one utility table per function node is required")
    if not graph.acyclic:
        if not allow_cycles:
            raise CyclicGraphError(CYCLIC_MESSAGE)
        logger.warning("%s; running %d rounds", CYCLIC_MESSAGE, max_rounds)
    if domain_sizes is None:
        domain_sizes = _domain_sizes(graph, utilities)
    utilities = [np.asarray(u, dtype=float) for u in utilities]

    q, r, done = flood(
        graph,
        message_rounds(graph, max_rounds),
        initial=lambda i: np.zeros(domain_sizes[i]),
        variable_update=lambda i, j, inc: variable_message(inc, domain_sizes[i]),
        function_update=lambda j, pos, inc: function_message(utilities[j], pos, inc),
        same=np.array_equal,
    )
    z = [
        marginal([r[j, i] for j in graph.var_neighbors[i]], domain_sizes[i])
        for i in range(graph.num_variables)
    ]
    x = tuple(int(np.argmax(zi)) for zi in z)
    return MaxSumRun(q=q, r=r, marginals=z, assignment=x, rounds=done)


def joint_value(graph: FactorGraph, utilities: Sequence[np.ndarray], x: Sequence[int]) -> float:
    return float(
        sum(u[tuple(x[i] for i in scope)] for u, scope in zip(utilities, graph.func_neighbors))
    )


def solve_dcop(
    graph: FactorGraph,
    utilities: Sequence[np.ndarray],
    *,
    domain_sizes: Sequence[int] | None = None,
    allow_cycles: bool = False,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> tuple[tuple[int, ...], float]:
    """Max-Sum assignment (lowest-index tie-break) and its total utility."""
    run = run_maxsum(
        graph,
        utilities,
        domain_sizes=domain_sizes,
        allow_cycles=allow_cycles,
        max_rounds=max_rounds,
    )
    return run.assignment, joint_value(graph, utilities, run.assignment)


def _domain_sizes(graph: FactorGraph, utilities) -> list[int]:
    sizes = [None] * graph.num_variables
    for u, scope in zip(utilities, graph.func_neighbors):
        for p, i in enumerate(scope):
            d = np.shape(u)[p]
            if sizes[i] is not None and sizes[i] != d:
                raise ValueError(f"inconsistent domain size for variable {i}")
            sizes[i] = d
    if any(s is None for s in sizes):
        raise ValueError("domain_sizes is required for variables outside every scope")
    return sizes
