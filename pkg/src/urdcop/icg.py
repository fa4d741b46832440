"""Iterative constraint generation with Max-Sum (ICG-Max-Sum).

The master problem picks the assignment minimising the worst regret over the
current witness set; it is solved by Max-Sum over regret vectors with one
component per witness. The subproblem finds the witness (belief, assignment)
with the largest regret against the master's assignment; it is ordinary
scalar Max-Sum over belief-maximised local utilities. Both regrets are
aggregated over a spanning tree so every node sees the same totals.

Master messages come in two flavours. ``mode="single"`` keeps one regret
vector per domain value and picks, at every function node, the completion
with the smallest worst component. ``mode="pareto"`` (the default) keeps
every completion whose vector is not componentwise dominated. Min-max does
not distribute over vector sums, so only the Pareto form is exact on trees;
when every front is a singleton both flavours send identical messages.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from .factor_graph import (
    DEFAULT_MAX_ROUNDS,
    CyclicGraphError,
    FactorGraph,
    PropagationTree,
    build_factor_graph,
    message_rounds,
    spanning_tree,
)
from .maxsum import CYCLIC_MESSAGE, flood, run_maxsum, sweep
from .model import (
    NEG_INFINITY,
    Assignment,
    Constraint,
    Instance,
    JointBelief,
    check_assignment,
    check_instance,
    point_mass,
)

logger = logging.getLogger(__name__)

TOL = 1e-9
DEFAULT_MAX_ITER = 1000

MasterMode = Literal["pareto", "single", "dual"]
# one (k, |G|) array of regret vectors per domain value
VectorMessage = tuple[np.ndarray, ...]


class IterationLimitError(RuntimeError):
    def __init__(self, message: str, best: SolveResult | None = None):
        super().__init__(message)
        self.best = best


class SolverTimeout(RuntimeError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True, eq=False)
class WitnessPoint:
    beliefs: JointBelief
    solution: Assignment

    def same_as(self, other: WitnessPoint, tol: float = TOL) -> bool:
        return self.solution == other.solution and all(
            a.shape == b.shape and np.all(np.abs(a - b) <= tol)
            for a, b in zip(self.beliefs, other.beliefs)
        )


@dataclass(frozen=True)
class IterationRecord:
    delta: float
    delta_prime: float
    added: bool
    num_witnesses: int


@dataclass
class SolveResult:
    assignment: Assignment
    regret: float
    iterations: list[IterationRecord]
    witnesses: list[WitnessPoint] = field(default_factory=list)
    algorithm: str = "icg-maxsum"
    max_regret: float = math.nan
    elapsed: float = 0.0
    # solver specific extras, e.g. the incumbent's regret
    info: dict = field(default_factory=dict)

    @property
    def num_witnesses(self) -> int:
        return len(self.witnesses)


# -- regret vectors -------------------------------------------------------


def regret_vector_add(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"regret vector length mismatch: {a.shape} vs {b.shape}")
    return a + b


def pareto_front(points: np.ndarray) -> np.ndarray:
    """Rows of ``points`` not componentwise dominated (minimisation), sorted."""
    pts = np.asarray(points, dtype=float)
    if len(pts) <= 1:
        return pts.copy()
    pts = pts[np.lexsort(pts.T[::-1])]
    pts = pts[np.r_[True, np.any(pts[1:] != pts[:-1], axis=1)]]
    n = len(pts)
    if n * n * pts.shape[1] <= 4_000_000:
        # rows are distinct, so a <= b componentwise means a dominates b
        le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
        return pts[le.sum(axis=0) == 1]
    order = np.argsort(pts.sum(axis=1), kind="stable")
    cand = pts[order]
    i = 0
    while i < len(cand):
        keep = np.any(cand < cand[i], axis=1)
        keep[i] = True
        cand = cand[keep]
        i = int(np.count_nonzero(keep[:i])) + 1
    return cand[np.lexsort(cand.T[::-1])]


def minkowski_sum(a: np.ndarray, b: np.ndarray, prune: bool = True) -> np.ndarray:
    if a.shape[1] != b.shape[1]:
        raise ValueError("regret vector length mismatch")
    out = (a[:, None, :] + b[None, :, :]).reshape(-1, a.shape[1])
    return pareto_front(out) if prune else out


def worst_case(front: np.ndarray) -> float:
    """Smallest worst component over the vectors of a front."""
    if front.shape[1] == 0:
        return NEG_INFINITY
    return float(front.max(axis=1).min())


# -- master problem -------------------------------------------------------


def witness_regret_tables(
    instance: Instance, witnesses: Sequence[WitnessPoint]
) -> list[np.ndarray]:
    """Per-function regret tensors shaped ``(*scope_domains, |G|)``.

    Component ``g`` holds ``U_j(b_j, x*_j) - U_j(b_j, x_j)`` for witness ``g``.
    """
    tables = []
    for j, t in enumerate(instance.tables):
        cols = [_witness_column(instance, j, t, w) for w in witnesses]
        if cols:
            tables.append(np.stack(cols, axis=-1))
        else:
            tables.append(np.zeros(t.shape[1:] + (0,)))
    return tables


def _witness_column(instance, j, table, w: WitnessPoint) -> np.ndarray:
    b = w.beliefs[j]
    expected = np.tensordot(b, table, axes=(0, 0))
    return expected[instance.restrict(w.solution, j)] - expected


def _completions(dims: Sequence[int], target: int, value: int):
    ranges = [range(d) if p != target else (value,) for p, d in enumerate(dims)]
    return itertools.product(*ranges)


@dataclass(frozen=True)
class Bound:
    """Pruning data for one message.

    ``tau`` is an upper bound on the master optimum. Vectors are projected
    onto the rows of ``dirs`` (unit vectors and nonnegative weightings that
    sum to one, so every projection is at most the worst component);
    ``floor[v]`` bounds from below, per projection, what the rest of the
    graph can add for domain value ``v``.
    """

    tau: float
    floor: np.ndarray
    dirs: np.ndarray | None = None

    @property
    def limit(self) -> float:
        return self.tau + 1e-7 * (1.0 + abs(self.tau))

    def project(self, front: np.ndarray) -> np.ndarray:
        return front if self.dirs is None else front @ self.dirs.T


def _cut(front: np.ndarray, floor: np.ndarray, limit: float, bound: Bound | None = None) -> np.ndarray:
    if len(front) == 0:
        return front
    proj = front if bound is None else bound.project(front)
    return front[(proj + floor).max(axis=1) <= limit]


def _bounded_sum(start: np.ndarray, fronts: Sequence[np.ndarray], bound: Bound | None, v: int) -> np.ndarray:
    """Minkowski sum of ``start`` and ``fronts``, dropping hopeless partial sums."""
    width = start.shape[1]
    if any(len(f) == 0 for f in fronts):
        return np.zeros((0, width))
    if bound is not None:
        # suffix[k]: smallest projections still to come after front k
        suffix = [np.zeros(bound.floor.shape[-1])]
        for f in reversed(fronts[1:]):
            suffix.append(suffix[-1] + bound.project(f).min(axis=0))
        suffix.reverse()
    acc = start
    for k, f in enumerate(fronts):
        acc = (acc[:, None, :] + f[None, :, :]).reshape(-1, width)
        if bound is not None:
            acc = _cut(acc, bound.floor[v] + suffix[k], bound.limit, bound)
        acc = pareto_front(acc)
    return acc


DENSE_LIMIT = 1_000_000


def _dense_completions(regret_table, others, incoming):
    """All completion sums at once, shaped ``(*dims, K_1, .., K_m, |G|)``.

    Incoming fronts are padded to a common length with ``+inf`` rows. Returns
    ``None`` when the tensor would exceed ``DENSE_LIMIT`` entries.
    """
    dims = regret_table.shape[:-1]
    n_w = regret_table.shape[-1]
    lengths = [max(1, max(len(f) for f in incoming[p])) for p in others]
    if math.prod(dims) * math.prod(lengths) * n_w > DENSE_LIMIT:
        return None
    m = len(others)
    total = regret_table.reshape(dims + (1,) * m + (n_w,))
    for k, (p, K) in enumerate(zip(others, lengths)):
        arr = np.full((dims[p], K, n_w), math.inf)
        for val, f in enumerate(incoming[p]):
            arr[val, : len(f)] = f
        shape = [1] * (len(dims) + m) + [n_w]
        shape[p], shape[len(dims) + k] = dims[p], K
        total = total + arr.reshape(shape)
    return total


def master_function_message(
    regret_table: np.ndarray,
    target: int,
    incoming: Mapping[int, VectorMessage],
    mode: MasterMode = "pareto",
    bound: Bound | None = None,
) -> VectorMessage:
    """Function-to-variable message of the master problem.

    ``regret_table`` is shaped ``(*scope_domains, |G|)``; ``target`` and the
    keys of ``incoming`` are scope positions. In pareto mode an optional
    ``bound`` discards vectors that cannot lead to a solution within
    ``bound.tau``.
    """
    regret_table = np.asarray(regret_table, dtype=float)
    dims = regret_table.shape[:-1]
    n_w = regret_table.shape[-1]
    if n_w == 0:
        raise ValueError("master messages need a non-empty witness set")
    others = [p for p in range(len(dims)) if p != target]
    if set(incoming) != set(others):
        raise ValueError("missing incoming message")
    for p in others:
        if any(m.shape[-1] != n_w for m in incoming[p]):
            raise ValueError("regret vector length mismatch")

    dense = _dense_completions(regret_table, others, incoming) if mode == "pareto" else None
    out = []
    for v in range(dims[target]):
        if mode == "single":
            best, best_score = np.full(n_w, math.inf), math.inf
            for xj in _completions(dims, target, v):
                vec = regret_table[xj].copy()
                for p in others:
                    vec += incoming[p][xj[p]][0]
                score = vec.max()
                if score < best_score:
                    best, best_score = vec, score
            out.append(best[None, :])
        elif mode == "pareto" and dense is not None:
            sub = np.take(dense, v, axis=target).reshape(-1, n_w)
            sub = sub[np.isfinite(sub[:, 0])] if others else sub
            if bound is not None:
                sub = _cut(sub, bound.floor[v], bound.limit, bound)
            out.append(pareto_front(sub))
        elif mode == "pareto":
            parts = [
                _bounded_sum(regret_table[xj][None, :], [incoming[p][xj[p]] for p in others], bound, v)
                for xj in _completions(dims, target, v)
            ]
            front = pareto_front(np.concatenate(parts))
            if bound is not None:
                front = _cut(front, bound.floor[v], bound.limit, bound)
            out.append(front)
        else:
            raise ValueError(f"unknown master mode {mode!r}")
    return tuple(out)


def _dense_sum(fronts: Sequence[np.ndarray], n_w: int) -> np.ndarray:
    total = np.zeros((1, n_w))
    for f in fronts:
        total = (total[:, None, :] + f[None, :, :]).reshape(-1, n_w)
    return total


def _sum_messages(
    incoming: Sequence[VectorMessage], domain_size: int, n_w: int, mode, bound=None
) -> list:
    for msg in incoming:
        if len(msg) != domain_size:
            raise ValueError("payload domain mismatch")
        if any(m.shape[-1] != n_w for m in msg):
            raise ValueError("regret vector length mismatch")
    zero = np.zeros((1, n_w))
    acc = []
    for v in range(domain_size):
        fronts = [msg[v] for msg in incoming]
        if mode == "single":
            acc.append(zero + sum(f for f in fronts) if fronts else zero)
        else:
            if math.prod(len(f) for f in fronts) * n_w <= DENSE_LIMIT:
                total = _dense_sum(fronts, n_w)
                if bound is not None:
                    total = _cut(total, bound.floor[v], bound.limit, bound)
                total = pareto_front(total)
            else:
                total = _bounded_sum(zero, fronts, bound, v)
            acc.append(total)
    return acc


def master_variable_message(
    incoming: Sequence[VectorMessage],
    domain_size: int,
    num_witnesses: int,
    *,
    normalize: bool = False,
    mode: MasterMode = "pareto",
    bound: Bound | None = None,
) -> VectorMessage:
    """Variable-to-function message: componentwise sum of the incoming vectors.

    With ``normalize=True`` a constant vector is subtracted so each component
    sums to zero over the domain (for fronts, each value's componentwise
    minimum is used). The solver never normalises: shifting a regret vector
    moves the min-max choice further along the graph.
    """
    acc = _sum_messages(incoming, domain_size, num_witnesses, mode, bound)
    if normalize:
        shift = np.mean([a.min(axis=0) for a in acc if len(a)], axis=0)
        acc = [a - shift for a in acc]
    return tuple(acc)


def master_marginal(
    incoming: Sequence[VectorMessage],
    domain_size: int,
    num_witnesses: int,
    mode: MasterMode = "pareto",
    bound: Bound | None = None,
) -> VectorMessage:
    return tuple(_sum_messages(incoming, domain_size, num_witnesses, mode, bound))


def master_select(marginal: Sequence) -> int:
    """Domain index with the smallest worst-case regret (first on ties).

    A value whose front was pruned away entirely scores ``+inf``.
    """
    scores = []
    for z in marginal:
        z = np.asarray(z, dtype=float)
        z = z.reshape(-1, z.shape[-1]) if z.ndim else z.reshape(1, 1)
        scores.append(worst_case(z) if len(z) else math.inf)
    return int(np.argmin(scores))


def _same_message(a: VectorMessage, b: VectorMessage) -> bool:
    return all(x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b))


def propagate_sum(
    tree: PropagationTree, contributions: Mapping[int, np.ndarray]
) -> dict[int, np.ndarray]:
    """Aggregate node contributions over the tree; every node gets the total.

    Partial sums go up to the roots, the roots' totals are combined and the
    result is handed back down, so all nodes hold the identical array.
    """
    subtotal = {u: np.asarray(contributions[u], dtype=float).copy() for u in tree.order}
    for u in reversed(tree.order):
        p = tree.parent[u]
        if p is not None:
            subtotal[p] = subtotal[p] + subtotal[u]
    total = subtotal[tree.roots[0]]
    for root in tree.roots[1:]:
        total = total + subtotal[root]
    return {u: total for u in tree.order}


def _node_contributions(graph: FactorGraph, per_function: Sequence[np.ndarray], width: int):
    zero = np.zeros(width)
    contrib = {i: zero for i in range(graph.num_variables)}
    for j, vec in enumerate(per_function):
        contrib[graph.function_node(j)] = vec
    return contrib


def propagate_delta(
    graph: FactorGraph,
    tree: PropagationTree,
    x: Sequence[int],
    regret_tables: Sequence[np.ndarray],
    *,
    debug: bool = False,
) -> float:
    """Worst regret of ``x`` over the witnesses encoded in ``regret_tables``."""
    n_w = regret_tables[0].shape[-1] if regret_tables else 0
    if n_w == 0:
        return NEG_INFINITY
    local = [
        t[tuple(x[i] for i in scope)] for t, scope in zip(regret_tables, graph.func_neighbors)
    ]
    held = propagate_sum(tree, _node_contributions(graph, local, n_w))
    deltas = {u: float(v.max()) for u, v in held.items()}
    delta = deltas[tree.root]
    if debug:
        assert all(d == delta for d in deltas.values()), "nodes disagree on delta"
    return delta


def _propagate(graph, tree, rounds, initial, variable_update, function_update, same):
    """Tree sweep on forests, synchronous flooding otherwise."""
    if graph.acyclic:
        q, r = sweep(graph, tree, variable_update, function_update)
        return q, r, rounds
    return flood(graph, rounds, initial, variable_update, function_update, same)


def _floor_messages(graph, tree, tables, domain_sizes, width, rounds):
    """Componentwise-minimum messages: each component minimised on its own.

    ``lq[i, j][v]`` bounds from below every vector the part of the graph
    behind variable ``i`` can contribute along edge ``(i, j)`` when ``x_i = v``
    (``lr`` likewise for the function side).
    """

    def func_update(j, pos, inc):
        t = tables[j]
        total = t
        for p, m in inc.items():
            shape = [1] * t.ndim
            shape[p], shape[-1] = t.shape[p], width
            total = total + m.reshape(shape)
        axes = tuple(p for p in range(t.ndim - 1) if p != pos)
        return total.min(axis=axes) if axes else total.copy()

    def var_update(i, j, inc):
        return np.sum(inc, axis=0) if inc else np.zeros((domain_sizes[i], width))

    lq, lr, _ = _propagate(
        graph, tree, rounds,
        initial=lambda i: np.zeros((domain_sizes[i], width)),
        variable_update=var_update,
        function_update=func_update,
        same=np.array_equal,
    )
    return lq, lr


def _min_sum(graph, tree, tables, domain_sizes, rounds):
    """Minimising assignment of width-1 tables and the exact minimum.

    The value is read off the unnormalised marginals, so it stays exact on
    trees even when ties make the decoded assignment suboptimal.
    """
    lq, lr = _floor_messages(graph, tree, tables, domain_sizes, 1, rounds)
    z = [
        np.sum([lr[j, i] for j in graph.var_neighbors[i]], axis=0)[:, 0]
        if graph.var_neighbors[i] else np.zeros(domain_sizes[i])
        for i in range(graph.num_variables)
    ]
    value = sum(
        float(z[comp[0]].min()) for comp in graph.components if comp[0] < graph.num_variables
    )
    return tuple(int(np.argmin(zi)) for zi in z), value


@dataclass
class DualBound:
    """Lagrangian weights for the master, found by column generation.

    ``lower`` is ``min_x weights . R(x)``, a lower bound on the min-max
    regret; ``candidates`` are the assignments priced along the way, each a
    feasible point whose worst regret bounds the optimum from above.
    """

    weights: np.ndarray
    lower: float
    candidates: list[tuple[Assignment, float]]


def dual_bound(
    graph: FactorGraph,
    tables: Sequence[np.ndarray],
    tree: PropagationTree,
    domain_sizes: Sequence[int],
    *,
    seeds: Sequence[Assignment] = (),
    max_iter: int = 20,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> DualBound:
    """Maximise ``min_x lambda . R(x)`` over the simplex.

    Pricing is min-sum on ``lambda . R``; the restricted dual over the priced
    vectors is a small LP that every node can solve from the same propagated
    totals. ``seeds`` are assignments priced in earlier calls, reused as
    starting columns.
    """
    from scipy.optimize import linprog

    n_w = tables[0].shape[-1]
    rounds = message_rounds(graph, max_rounds)
    vectors, cands = [], []

    def add(x):
        local = [t[tuple(x[i] for i in sc)] for t, sc in zip(tables, graph.func_neighbors)]
        vec = propagate_sum(tree, _node_contributions(graph, local, n_w))[tree.root]
        vectors.append(vec)
        cands.append((tuple(x), float(vec.max())))

    def restricted_dual():
        # max t s.t. t <= lambda . R_k for every priced vector, lambda in simplex
        V = np.array(vectors)
        res = linprog(
            c=np.r_[np.zeros(n_w), -1.0],
            A_ub=np.c_[-V, np.ones(len(V))],
            b_ub=np.zeros(len(V)),
            A_eq=np.r_[np.ones(n_w), 0.0][None, :],
            b_eq=[1.0],
            bounds=[(0, None)] * n_w + [(None, None)],
            method="highs",
        )
        if res.status != 0:
            return None, math.inf
        lam = np.clip(res.x[:n_w], 0.0, None)
        return lam / lam.sum(), -res.fun

    for x in seeds:
        add(x)
    lam, ceiling = restricted_dual() if vectors else (None, math.inf)
    if lam is None:
        lam = np.full(n_w, 1.0 / n_w)
    best_lam, best_lower = lam, NEG_INFINITY
    for _ in range(max_iter):
        x, lower = _min_sum(graph, tree, [(t @ lam)[..., None] for t in tables], domain_sizes, rounds)
        add(x)
        if lower > best_lower:
            best_lam, best_lower = lam, lower
        lam_next, ceiling = restricted_dual()
        if lam_next is None or ceiling - best_lower <= 1e-9 * (1.0 + abs(best_lower)):
            break
        lam = lam_next
    return DualBound(best_lam, best_lower, cands)


@dataclass
class MasterRun:
    assignment: Assignment
    delta: float
    marginals: list[VectorMessage]
    q: dict
    r: dict
    rounds: int
    thresholds: list[float] = field(default_factory=list)
    # assignments priced by the dual, reusable by the next master
    candidates: list[Assignment] = field(default_factory=list)


def _pareto_pass(
    graph, tree, tables, domain_sizes, n_w, rounds, mode,
    tau=None, floors=None, dirs=None,
):
    if tau is None:
        bq = br = bz = None
    else:
        lq, lr = floors
        width = dirs.shape[0]

        def bound(floor):
            return Bound(tau, floor, dirs)

        # a q message is completed by the r message coming back, and vice versa
        bq = {(i, j): bound(lr[j, i]) for (i, j) in lq}
        br = {(j, i): bound(lq[i, j]) for (j, i) in lr}
        bz = {i: bound(np.zeros((domain_sizes[i], width))) for i in range(graph.num_variables)}
    q, r, done = _propagate(
        graph,
        tree,
        rounds,
        initial=lambda i: tuple(np.zeros((1, n_w)) for _ in range(domain_sizes[i])),
        variable_update=lambda i, j, inc: master_variable_message(
            inc, domain_sizes[i], n_w, mode=mode, bound=None if bq is None else bq[i, j]
        ),
        function_update=lambda j, pos, inc: master_function_message(
            tables[j], pos, inc, mode,
            bound=None if br is None else br[j, graph.func_neighbors[j][pos]],
        ),
        same=_same_message,
    )
    z = [
        master_marginal(
            [r[j, i] for j in graph.var_neighbors[i]], domain_sizes[i], n_w, mode,
            bound=None if bz is None else bz[i],
        )
        for i in range(graph.num_variables)
    ]
    return q, r, z, done


POOL_SIZE = 50
TAU_STEPS = (1 / 256, 1 / 32, 1 / 4, 1.0)


def run_master(
    graph: FactorGraph,
    regret_tables: Sequence[np.ndarray],
    *,
    tree: PropagationTree | None = None,
    domain_sizes: Sequence[int] | None = None,
    mode: MasterMode = "pareto",
    prune: bool = True,
    seeds: Sequence[Assignment] = (),
    dual_iters: int = 20,
    lower_bound: float = NEG_INFINITY,
    upper_bound: float = math.inf,
    allow_cycles: bool = False,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    debug: bool = False,
) -> MasterRun:
    """Vector Max-Sum for the master problem given per-function regret tensors.

    Pruned pareto mode first bounds the optimum: from above by the regret of
    the single-vector assignment and of the dual pricing assignments, from
    below by the Lagrangian dual. Lower-bound messages along the unit and dual
    directions then let every pareto pass drop vectors that cannot finish
    within a threshold ``tau``. A ``tau`` below the optimum leaves some
    marginal empty and is retried closer to the upper bound; the first pass
    that leaves a solution is exact. ``lower_bound``/``upper_bound`` let the
    caller tighten the search; ``seeds`` are assignments worth reusing as
    dual columns and fallbacks.

    ``mode="dual"`` stops after the bounding step and returns the best of the
    single-vector and pricing assignments (and ``seeds``). It is a heuristic,
    but each call costs a few scalar passes and favours assignments already
    seen, which keeps the outer loop short on large instances.
    """
    if not graph.acyclic and not allow_cycles:
        raise CyclicGraphError(CYCLIC_MESSAGE)
    tree = tree or spanning_tree(graph)
    if domain_sizes is None:
        domain_sizes = [None] * graph.num_variables
        for t, scope in zip(regret_tables, graph.func_neighbors):
            for p, i in enumerate(scope):
                domain_sizes[i] = t.shape[p]
    n_w = regret_tables[0].shape[-1] if regret_tables else 0
    if n_w == 0:
        x = tuple(0 for _ in range(graph.num_variables))
        return MasterRun(x, NEG_INFINITY, [], {}, {}, 0)

    tables = [np.asarray(t, dtype=float) for t in regret_tables]
    rounds = message_rounds(graph, max_rounds)
    if mode == "single" or not prune:
        q, r, z, done = _pareto_pass(graph, tree, tables, domain_sizes, n_w, rounds, mode)
        x = tuple(master_select(zi) for zi in z)
        return MasterRun(x, propagate_delta(graph, tree, x, tables, debug=debug), z, q, r, done)

    heuristic = run_master(
        graph, tables, tree=tree, domain_sizes=domain_sizes, mode="single",
        allow_cycles=allow_cycles, max_rounds=max_rounds,
    )
    dual = dual_bound(
        graph, tables, tree, domain_sizes, seeds=seeds, max_iter=dual_iters, max_rounds=max_rounds
    )
    fallback = min([(heuristic.delta, heuristic.assignment)] + [(v, x) for x, v in dual.candidates])
    if mode == "dual":
        return MasterRun(
            fallback[1], fallback[0], [], {}, {}, 0, candidates=[c for c, _ in dual.candidates]
        )
    hi = min(fallback[0], upper_bound)
    dirs = np.eye(n_w)
    if n_w > 1:
        dirs = np.vstack([dirs, dual.weights])
    floors = _floor_messages(graph, tree, [t @ dirs.T for t in tables], domain_sizes, len(dirs), rounds)
    lo = min(max(lower_bound, dual.lower), hi)
    tried = []
    for frac in TAU_STEPS:
        tau = hi if frac == 1.0 else lo + frac * (hi - lo)
        if tried and tau <= tried[-1]:
            continue
        tried.append(tau)
        q, r, z, done = _pareto_pass(
            graph, tree, tables, domain_sizes, n_w, rounds, mode,
            tau=tau, floors=floors, dirs=dirs,
        )
        if all(any(len(front) for front in zi) for zi in z):
            break
    if all(any(len(front) for front in zi) for zi in z):
        x = tuple(master_select(zi) for zi in z)
        delta = propagate_delta(graph, tree, x, tables, debug=debug)
    else:
        delta, x = fallback
    return MasterRun(
        x, delta, z, q, r, done, thresholds=tried, candidates=[c for c, _ in dual.candidates],
    )


def solve_master(
    graph: FactorGraph,
    instance: Instance,
    witnesses: Sequence[WitnessPoint] = (),
    *,
    regret_tables: Sequence[np.ndarray] | None = None,
    **kwargs,
) -> tuple[Assignment, float]:
    """Minimax assignment and regret over ``witnesses``.

    ``regret_tables`` (shaped as :func:`witness_regret_tables` returns) may
    be passed instead, for regret values that no witness realises. An empty
    witness set yields the all-first-values assignment and ``NEG_INFINITY``.
    """
    if regret_tables is None:
        regret_tables = witness_regret_tables(instance, witnesses)
    if not regret_tables or regret_tables[0].shape[-1] == 0:
        return tuple(0 for _ in range(instance.num_agents)), NEG_INFINITY
    run = run_master(graph, regret_tables, domain_sizes=instance.domain_sizes, **kwargs)
    return run.assignment, run.delta


# -- subproblem -----------------------------------------------------------


def subproblem_utility(
    constraint: Constraint | np.ndarray, xstar_j: Sequence[int], x_j: Sequence[int]
) -> tuple[float, np.ndarray]:
    """Largest regret of ``x_j`` against ``xstar_j`` over beliefs of one state.

    The objective is linear in the belief, so the maximum sits at the point
    mass of the best state (the lowest index on ties).
    """
    table = constraint.table if isinstance(constraint, Constraint) else np.asarray(constraint)
    if table.ndim != 1 + len(x_j) or len(xstar_j) != len(x_j):
        raise ValueError("table must be shaped (states, *scope domains)")
    diff = table[(slice(None),) + tuple(xstar_j)] - table[(slice(None),) + tuple(x_j)]
    s = int(np.argmax(diff))
    return float(diff[s]), point_mass(table.shape[0], s)


def subproblem_tables(instance: Instance, x: Sequence[int]) -> list[np.ndarray]:
    """Belief-maximised regret utilities ``max_s U(s, x'_j) - U(s, x_j)``."""
    out = []
    for j, t in enumerate(instance.tables):
        ref = t[(slice(None),) + instance.restrict(x, j)]
        out.append((t - ref.reshape((-1,) + (1,) * (t.ndim - 1))).max(axis=0))
    return out


def solve_subproblem(
    graph: FactorGraph,
    instance: Instance,
    x: Sequence[int],
    *,
    tree: PropagationTree | None = None,
    allow_cycles: bool = False,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> tuple[WitnessPoint, float]:
    """Most violated witness against ``x`` and its regret."""
    x = check_assignment(instance, x)
    tree = tree or spanning_tree(graph)
    utilities = subproblem_tables(instance, x)
    run = run_maxsum(
        graph,
        utilities,
        domain_sizes=instance.domain_sizes,
        allow_cycles=allow_cycles,
        max_rounds=max_rounds,
    )
    xstar = run.assignment
    beliefs, local = [], []
    for j, t in enumerate(instance.tables):
        value, b = subproblem_utility(t, instance.restrict(xstar, j), instance.restrict(x, j))
        beliefs.append(b)
        local.append(np.array([value]))
    held = propagate_sum(tree, _node_contributions(graph, local, 1))
    delta_prime = float(held[tree.root][0])
    if delta_prime < 0:
        # only reachable on cyclic graphs; x itself is a zero-regret witness
        logger.warning("subproblem Max-Sum returned regret %g < 0; using x", delta_prime)
        return solve_subproblem_trivial(instance, x), 0.0
    return WitnessPoint(tuple(beliefs), xstar), delta_prime


def solve_subproblem_trivial(instance: Instance, x: Assignment) -> WitnessPoint:
    return WitnessPoint(tuple(point_mass(c.num_states, 0) for c in instance.constraints), x)


# -- outer loop -----------------------------------------------------------


def icg_loop(
    instance: Instance,
    master,
    subproblem,
    *,
    algorithm: str,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = TOL,
    time_limit: float | None = None,
    extra_cuts=None,
) -> SolveResult:
    """Alternate ``master(witnesses, tables)`` and ``subproblem(x)`` to termination.

    ``master`` returns ``(x, delta)``; ``subproblem`` returns
    ``(witness, delta_prime)``. Regret tensors are maintained incrementally and
    handed to ``master``. ``extra_cuts(x)``, if given, is called after each
    added witness and returns further ``(assignment, witness, delta_prime)``
    triples; their new witnesses join the set too.
    """
    start = time.perf_counter()
    witnesses: list[WitnessPoint] = []
    tables = witness_regret_tables(instance, [])
    trace: list[IterationRecord] = []
    best: tuple[float, Assignment] | None = None

    def result(x, delta, dprime):
        return SolveResult(
            assignment=x,
            regret=delta,
            iterations=trace,
            witnesses=witnesses,
            algorithm=algorithm,
            max_regret=dprime,
            elapsed=time.perf_counter() - start,
        )

    for _ in range(max_iter):
        x, delta = master(witnesses, tables)
        witness, dprime = subproblem(x)
        added = dprime > delta + tol
        trace.append(IterationRecord(delta, dprime, added, len(witnesses)))
        if best is None or dprime < best[0]:
            best = (dprime, x)
        if not added:
            if best[0] < dprime - tol:
                # only with an inexact master: a cut point did better than x
                return result(best[1], best[0], best[0])
            return result(x, delta, dprime)
        if any(witness.same_as(w, tol) for w in witnesses):
            logger.warning("subproblem repeated a known witness; stopping")
            return result(x, delta, dprime)
        fresh = [witness]
        for xc, w, dp in extra_cuts(x) if extra_cuts is not None else ():
            if dp < best[0]:
                best = (dp, xc)
            if not any(w.same_as(v, tol) for v in witnesses + fresh):
                fresh.append(w)
        witnesses.extend(fresh)
        tables = [
            np.concatenate(
                [t] + [_witness_column(instance, j, it, w)[..., None] for w in fresh], axis=-1
            )
            for j, (t, it) in enumerate(zip(tables, instance.tables))
        ]
        if time_limit is not None and time.perf_counter() - start > time_limit:
            raise SolverTimeout(
                f"time limit {time_limit}s exceeded", result(best[1], math.nan, best[0])
            )
    raise IterationLimitError(
        f"no convergence within {max_iter} iterations", result(best[1], math.nan, best[0])
    )


def icg_maxsum(
    instance: Instance,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = TOL,
    allow_cycles: bool = False,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    mode: MasterMode = "pareto",
    dual_iters: int = 20,
    extra_cuts: int = 0,
    time_limit: float | None = None,
    debug: bool = False,
) -> SolveResult:
    """Minimax-regret assignment by decentralised ICG-Max-Sum.

    ``mode="pareto"`` (the default) solves every master exactly on trees, so
    the returned regret is the optimum. ``mode="dual"`` replaces the vector
    fronts with ``dual_iters`` rounds of scalar pricing; the loop still stops
    only on a certified ``delta_prime <= delta``, but the value may sit above
    the optimum. ``mode="single"`` keeps one vector per message.

    ``extra_cuts=k`` also solves the subproblem for the ``k`` most promising
    other master candidates each iteration and adds their witnesses. The best
    assignment seen is returned when it beats the last master's.
    ``result.info["incumbent"]`` holds its certified regret.
    """
    check_instance(instance)
    graph = build_factor_graph(instance)
    if not graph.acyclic:
        if not allow_cycles:
            raise CyclicGraphError(CYCLIC_MESSAGE)
        logger.warning("%s; best-effort mode with %d rounds", CYCLIC_MESSAGE, max_rounds)
    tree = spanning_tree(graph)
    opts = dict(allow_cycles=allow_cycles, max_rounds=max_rounds)

    history: list[tuple[float, float]] = []  # (delta, delta_prime) per iteration
    last_delta = [NEG_INFINITY]
    incumbent: list = [math.inf, None]  # lowest delta_prime seen and its assignment
    pool: dict[Assignment, None] = {}  # insertion-ordered set of dual columns
    cut_points: list[Assignment] = []

    def master(witnesses, tables):
        if not witnesses:
            return tuple(0 for _ in range(instance.num_agents)), NEG_INFINITY
        # the optimum never drops as witnesses are added, and no assignment
        # seen so far does worse over the current set than its delta_prime
        lo = history[-1][0] if history else NEG_INFINITY
        seeds = list(pool)[-POOL_SIZE:]
        if incumbent[1] is not None and incumbent[1] not in seeds:
            seeds.append(incumbent[1])
        run = run_master(
            graph, tables, tree=tree, domain_sizes=instance.domain_sizes,
            mode=mode, dual_iters=dual_iters, seeds=seeds, debug=debug,
            lower_bound=lo, upper_bound=incumbent[0], **opts,
        )
        pool.update(dict.fromkeys(run.candidates))
        pool[run.assignment] = None
        last_delta[0] = run.delta
        if extra_cuts:
            others = set(run.candidates) - {run.assignment}
            ranked = sorted((propagate_delta(graph, tree, c, tables), c) for c in others)
            cut_points[:] = [c for _, c in ranked[:extra_cuts]]
        return run.assignment, run.delta

    def subproblem(x):
        witness, dprime = solve_subproblem(graph, instance, x, tree=tree, **opts)
        history.append((last_delta[0], dprime))
        if dprime < incumbent[0]:
            incumbent[:] = [dprime, x]
        return witness, dprime

    def cuts(_x):
        out = []
        for c in cut_points:
            w, dp = solve_subproblem(graph, instance, c, tree=tree, **opts)
            if dp < incumbent[0]:
                incumbent[:] = [dp, c]
            out.append((c, w, dp))
        return out

    try:
        result = icg_loop(
            instance, master, subproblem,
            algorithm="icg-maxsum", max_iter=max_iter, tol=tol, time_limit=time_limit,
            extra_cuts=cuts if extra_cuts else None,
        )
    except (SolverTimeout, IterationLimitError) as exc:
        if exc.best is not None:
            exc.best.info["incumbent"] = incumbent[0]
        raise
    result.info["incumbent"] = incumbent[0]
    return result
