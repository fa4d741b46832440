import itertools

import numpy as np
import pytest

from urdcop.bench import GenParams, generate_instance
from urdcop.model import Constraint, Instance

# regret table of the two-variable, two-witness master example:
# rows are (x1, x2) in {A, B} x {C, D}, columns the witnesses
FIG1 = {
    (0, 0): (-57.0, 64.0),
    (0, 1): (-96.0, -162.0),
    (1, 0): (54.0, 72.0),
    (1, 1): (-4.0, 55.0),
}


def fig1_tables():
    t = np.zeros((2, 2, 2))
    for (a, b), v in FIG1.items():
        t[a, b] = v
    return [t]


def fig1_instance():
    # the shape only matters: two binary variables sharing one function
    return Instance(
        agents=("x1", "x2"),
        domains=(("A", "B"), ("C", "D")),
        constraints=(Constraint(0, (0, 1), 1, np.zeros(4)),),
        name="fig1",
    )


def two_state_swap():
    """One agent, values {A, B}; each state rewards a different value."""
    table = np.array([[10.0, 0.0], [0.0, 10.0]])
    return Instance(("a",), (("A", "B"),), (Constraint(0, (0,), 2, table),), name="swap")


def random_tree_instance(rng, n_vars=4, max_domain=3, max_scope=3, states=2, unary=0.5):
    """Random acyclic instance.

    Each new function joins one existing variable with up to ``max_scope - 1``
    fresh ones, so the factor graph stays a tree; unary functions are
    sprinkled on top.
    """
    domains = [tuple(f"v{k}" for k in range(int(rng.integers(1, max_domain + 1)))) for _ in range(n_vars)]
    scopes, placed = [], 1
    while placed < n_vars:
        fresh = int(rng.integers(1, min(max_scope - 1, n_vars - placed) + 1))
        anchor = int(rng.integers(placed))
        scopes.append((anchor, *range(placed, placed + fresh)))
        placed += fresh
    if n_vars == 1:
        scopes.append((0,))
    scopes += [(i,) for i in range(n_vars) if rng.random() < unary]
    cons = []
    for j, scope in enumerate(scopes):
        order = tuple(int(a) for a in rng.permutation(scope))
        dims = [len(domains[a]) for a in order]
        cons.append(Constraint(j, order, states, rng.normal(90.0, 5.0, size=(states, *dims))))
    return Instance(tuple(f"a{i}" for i in range(n_vars)), tuple(domains), tuple(cons))


def small_generated(seed, agents, states, max_scope=2, max_domain=3):
    """Generator instance with |T| = 2|A|; None when a domain exceeds ``max_domain``."""
    gen = generate_instance(
        GenParams(num_tasks=2 * agents, num_agents=agents, num_states=states, max_scope=max_scope, seed=seed)
    )
    if max(gen.instance.domain_sizes) > max_domain:
        return None
    return gen


def brute_minmax(tables, scopes, domain_sizes):
    """min over x of max_g sum_j tables[j][x_j, g], lexicographically first minimiser."""
    best = (np.inf, None)
    for x in itertools.product(*map(range, domain_sizes)):
        vec = sum(t[tuple(x[i] for i in s)] for t, s in zip(tables, scopes))
        v = float(np.max(vec))
        if v < best[0]:
            best = (v, x)
    return best[1], best[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
