import numpy as np
import pytest

from urdcop.bench import (
    BenchConfig,
    GenParams,
    evaluate_average_regret,
    format_table,
    generate_instance,
    instance_hash,
    optimal_value,
    run_benchmark,
)
from urdcop.factor_graph import build_factor_graph
from urdcop.model import deterministic_value
from urdcop.reference import enumerate_optimal


def test_generator_is_deterministic():
    a = generate_instance(GenParams(num_tasks=10, num_states=3, seed=4))
    b = generate_instance(GenParams(num_tasks=10, num_states=3, seed=4))
    c = generate_instance(GenParams(num_tasks=10, num_states=3, seed=5))
    assert instance_hash(a.instance) == instance_hash(b.instance)
    assert a.true_states == b.true_states
    assert instance_hash(a.instance) != instance_hash(c.instance)


def test_frozen_instance_hash():
    gen = generate_instance(GenParams(num_tasks=6, num_states=2, seed=7))
    assert instance_hash(gen.instance) == "292765cc60204b38"
    assert gen.true_states == (1, 1, 0, 1, 0, 1)


@pytest.mark.parametrize("seed", range(8))
def test_tree_topology_shape(seed):
    gen = generate_instance(GenParams(num_tasks=12, num_agents=6, num_states=4, max_scope=3, seed=seed))
    inst = gen.instance
    assert inst.num_agents == 6 and inst.num_constraints == 12
    assert build_factor_graph(inst).acyclic
    assert len(build_factor_graph(inst).components) == 1
    for c, t in zip(inst.constraints, inst.tables):
        assert 1 <= len(c.scope) <= 3
        assert t.shape[0] == 4
        # a domain is the list of tasks the agent is linked to
        for a in c.scope:
            assert f"t{c.id}" in inst.domains[a]
    assert all(0 <= s < 4 for s in gen.true_states)
    assert all(80 <= m <= 100 for m in gen.means)
    assert all(0 <= v <= 80 for v in gen.variances)


def test_spread_reading_is_configurable():
    var = generate_instance(GenParams(num_tasks=8, num_states=2, seed=3))
    std = generate_instance(GenParams(num_tasks=8, num_states=2, seed=3, spread="std"))
    # same draws, squared under the std reading
    assert var.means == std.means
    assert std.variances == pytest.approx([v * v for v in var.variances])
    assert instance_hash(var.instance) != instance_hash(std.instance)
    with pytest.raises(ValueError):
        generate_instance(GenParams(num_tasks=4, spread="range"))


def test_idle_task_is_worth_nothing():
    gen = generate_instance(GenParams(num_tasks=8, num_states=2, seed=2))
    inst = gen.instance
    for c, t in zip(inst.constraints, inst.tables):
        for idx in np.ndindex(*t.shape[1:]):
            picked = [inst.domains[a][v] for a, v in zip(c.scope, idx)]
            if f"t{c.id}" not in picked:
                assert np.all(t[(slice(None),) + idx] == 0.0)


def test_default_agent_count_and_validation():
    assert GenParams(num_tasks=7).agents == 4
    with pytest.raises(ValueError):
        generate_instance(GenParams(num_tasks=0))
    with pytest.raises(ValueError):
        generate_instance(GenParams(num_tasks=4, topology="ring"))
    with pytest.raises(ValueError):
        generate_instance(GenParams(num_tasks=2, num_agents=9, max_scope=2))


def test_random_topology_adds_links():
    tree = generate_instance(GenParams(num_tasks=20, seed=1))
    rand = generate_instance(GenParams(num_tasks=20, seed=1, topology="random"))
    edges = lambda g: build_factor_graph(g.instance).num_edges
    assert edges(rand) > edges(tree)


def test_optimal_value_matches_enumeration():
    gen = generate_instance(GenParams(num_tasks=6, num_states=3, seed=3))
    inst = gen.instance
    states = [1] * inst.num_constraints
    beliefs = [np.eye(3)[1] for _ in inst.constraints]
    assert optimal_value(inst, states) == pytest.approx(enumerate_optimal(inst, beliefs)[1], abs=1e-9)


def test_average_regret():
    gen = generate_instance(GenParams(num_tasks=6, num_states=3, seed=3))
    inst = gen.instance
    x = tuple(0 for _ in inst.agents)
    r1 = evaluate_average_regret(inst, x, runs=30, seed=9)
    r2 = evaluate_average_regret(inst, x, runs=30, seed=9)
    assert r1.regrets == r2.regrets
    assert len(r1.regrets) == 30 and min(r1.regrets) >= 0.0
    assert r1.mean == pytest.approx(np.mean(r1.regrets))
    with pytest.raises(ValueError):
        evaluate_average_regret(inst, x, runs=0)


def test_single_state_gap_is_deterministic_gap():
    gen = generate_instance(GenParams(num_tasks=6, num_states=1, seed=3))
    inst = gen.instance
    x = tuple(0 for _ in inst.agents)
    report = evaluate_average_regret(inst, x, runs=3)
    best = optimal_value(inst, [0] * inst.num_constraints)
    gap = best - deterministic_value(inst, [0] * inst.num_constraints, x)
    assert report.regrets == pytest.approx([gap] * 3)


def test_run_benchmark_records():
    config = {
        "algorithms": ["icg-maxsum", "dsa", "oracle"],
        "sizes": [{"tasks": 4, "states": 2}],
        "seeds": [0, 1],
        "eval_runs": 5,
        "params": {"dsa": {"outer_iters": 3}},
    }
    records = run_benchmark(config)
    assert len(records) == 6
    assert {r["status"] for r in records} == {"ok"}
    by = {(r["seed"], r["algorithm"]): r for r in records}
    for seed in (0, 1):
        assert by[seed, "icg-maxsum"]["regret"] == pytest.approx(by[seed, "oracle"]["regret"], abs=1e-9)
        assert by[seed, "dsa"]["instance_hash"] == by[seed, "oracle"]["instance_hash"]
    table = format_table(records)
    assert table.splitlines()[0].startswith("algorithm")
    assert len(table.splitlines()) == 8


def test_benchmark_records_failures_per_cell():
    records = run_benchmark({"algorithms": ["oracle"], "params": {"oracle": {"guard": 1}}})
    assert records[0]["status"].startswith("error")


def test_bench_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown benchmark config keys"):
        BenchConfig.from_dict({"algos": []})
