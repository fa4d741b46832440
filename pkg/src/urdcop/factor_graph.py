"""Factor graph construction, cycle detection and the propagation tree.

Node ids: variables occupy ``0..n-1`` and functions ``n..n+m-1``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

from .model import Instance, check_instance

DEFAULT_MAX_ROUNDS = 100


class CyclicGraphError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FactorGraph:
    num_variables: int
    num_functions: int
    # M(i): functions touching variable i, in constraint order
    var_neighbors: tuple[tuple[int, ...], ...]
    # N(j): variables in the scope of function j, in scope order
    func_neighbors: tuple[tuple[int, ...], ...]

    @property
    def num_nodes(self) -> int:
        return self.num_variables + self.num_functions

    @property
    def num_edges(self) -> int:
        return sum(len(s) for s in self.func_neighbors)

    def function_node(self, j: int) -> int:
        return self.num_variables + j

    def edges(self) -> list[tuple[int, int]]:
        """(variable, function) pairs, grouped by function."""
        return [(i, j) for j, scope in enumerate(self.func_neighbors) for i in scope]

    def neighbors(self, node: int) -> tuple[int, ...]:
        n = self.num_variables
        if node < n:
            return tuple(n + j for j in self.var_neighbors[node])
        return self.func_neighbors[node - n]

    @cached_property
    def components(self) -> tuple[tuple[int, ...], ...]:
        seen = [False] * self.num_nodes
        comps = []
        for start in range(self.num_nodes):
            if seen[start]:
                continue
            seen[start] = True
            comp, queue = [], deque([start])
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v in self.neighbors(u):
                    if not seen[v]:
                        seen[v] = True
                        queue.append(v)
            comps.append(tuple(sorted(comp)))
        return tuple(comps)

    @cached_property
    def acyclic(self) -> bool:
        # a graph is a forest iff |E| = |V| - #components
        return self.num_edges == self.num_nodes - len(self.components)


@dataclass(frozen=True, eq=False)
class PropagationTree:
    roots: tuple[int, ...]
    parent: dict[int, int | None]
    order: tuple[int, ...]

    @property
    def root(self) -> int:
        return self.roots[0]

    @cached_property
    def children(self) -> dict[int, tuple[int, ...]]:
        kids: dict[int, list[int]] = {u: [] for u in self.order}
        for u in self.order:
            p = self.parent[u]
            if p is not None:
                kids[p].append(u)
        return {u: tuple(c) for u, c in kids.items()}

    def edges(self) -> list[tuple[int, int]]:
        return [(p, u) for u, p in self.parent.items() if p is not None]


def build_factor_graph(instance: Instance) -> FactorGraph:
    check_instance(instance)
    n = instance.num_agents
    var_nb: list[list[int]] = [[] for _ in range(n)]
    func_nb = []
    for j, c in enumerate(instance.constraints):
        func_nb.append(tuple(c.scope))
        for a in c.scope:
            var_nb[a].append(j)
    return FactorGraph(
        num_variables=n,
        num_functions=len(func_nb),
        var_neighbors=tuple(tuple(v) for v in var_nb),
        func_neighbors=tuple(func_nb),
    )


def is_acyclic(graph: FactorGraph) -> bool:
    """True iff no connected component of ``graph`` contains a cycle."""
    parent = list(range(graph.num_nodes))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for i, j in graph.edges():
        a, b = find(i), find(graph.function_node(j))
        if a == b:
            return False
        parent[a] = b
    return True


def spanning_tree(graph: FactorGraph) -> PropagationTree:
    """BFS forest rooted at the lowest-id variable node of each component."""
    parent: dict[int, int | None] = {}
    order: list[int] = []
    roots = []
    for comp in graph.components:
        # variables have the lowest ids, so comp[0] is a variable if there is one
        root = comp[0]
        roots.append(root)
        parent[root] = None
        queue = deque([root])
        while queue:
            u = queue.popleft()
            order.append(u)
            for v in graph.neighbors(u):
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
    return PropagationTree(roots=tuple(roots), parent=parent, order=tuple(order))


def _eccentricity(graph: FactorGraph, start: int) -> tuple[int, int]:
    dist = {start: 0}
    queue = deque([start])
    far = start
    while queue:
        u = queue.popleft()
        if dist[u] > dist[far]:
            far = u
        for v in graph.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return far, dist[far]


def diameter(graph: FactorGraph) -> int:
    """Longest shortest path over all components (exact for forests)."""
    best = 0
    for comp in graph.components:
        far, _ = _eccentricity(graph, comp[0])
        _, d = _eccentricity(graph, far)
        best = max(best, d)
    return best


def message_rounds(graph: FactorGraph, max_rounds: int = DEFAULT_MAX_ROUNDS) -> int:
    """Synchronous rounds after which every message on a forest is exact.

    Cyclic graphs have no such bound and get ``max_rounds``.
    """
    if not graph.acyclic:
        return max_rounds
    return max(1, diameter(graph))
