import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urdcop.model import (
    NEG_INFINITY,
    Constraint,
    Instance,
    InstanceError,
    check_assignment,
    check_belief,
    check_instance,
    deterministic_value,
    expected_constraint_value,
    expected_total_value,
    point_mass,
    validate_instance,
)

from conftest import random_tree_instance


def two_agent(table=None, scope=(0, 1), states=1):
    table = np.arange(states * 4, dtype=float) if table is None else table
    return Instance(("a", "b"), (("x", "y"), ("u", "v")), (Constraint(0, scope, states, table),))


def test_well_formed_instance_is_ok():
    assert validate_instance(two_agent()) == []


def test_unknown_agent_in_scope():
    bad = two_agent(scope=(0, 5))
    (msg,) = validate_instance(bad)
    assert "unknown agent in scope" in msg


def test_table_one_entry_short():
    bad = two_agent(table=np.zeros(3))
    (msg,) = validate_instance(bad)
    assert "table size mismatch" in msg


def test_every_violation_is_reported():
    inst = Instance(
        ("a", "a"),
        (("x",), ()),
        (Constraint(0, (0, 0), 1, np.zeros(1)), Constraint(0, (), 1, np.zeros(1))),
    )
    report = validate_instance(inst)
    assert any("duplicate agent id" in m for m in report)
    assert any("empty domain" in m for m in report)
    assert any("duplicate agent in scope" in m for m in report)
    assert any("empty scope" in m for m in report)
    assert any("duplicate constraint ids" in m for m in report)
    with pytest.raises(InstanceError) as exc:
        check_instance(inst)
    assert exc.value.violations == report


def test_non_finite_utility():
    bad = two_agent(table=np.array([0.0, 1.0, math.inf, 2.0]))
    assert any("non-finite" in m for m in validate_instance(bad))


def test_tables_are_immutable():
    inst = two_agent()
    with pytest.raises(ValueError):
        inst.tables[0][0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        inst.constraints[0].table[0] = 1.0


def test_tables_state_major_then_scope_order():
    inst = two_agent(table=np.arange(8.0), states=2)
    t = inst.tables[0]
    assert t.shape == (2, 2, 2)
    assert t[1, 0, 1] == 5.0


def test_expected_value_examples():
    col = np.array([[10.0], [20.0]])
    assert expected_constraint_value(col, [0.5, 0.5], (0,)) == 15.0
    assert expected_constraint_value(col, [1.0, 0.0], (0,)) == 10.0


def test_expected_value_arity_mismatch():
    with pytest.raises(ValueError, match="belief/state arity mismatch"):
        expected_constraint_value(np.zeros((2, 1)), [1 / 3] * 3, (0,))


def test_expected_value_matches_state_sum(rng):
    table = rng.normal(size=(3, 2, 4))
    b = rng.dirichlet(np.ones(3))
    direct = sum(b[s] * table[s, 1, 2] for s in range(3))
    assert expected_constraint_value(table, b, (1, 2)) == pytest.approx(direct, abs=1e-12)


def test_total_value_is_additive(rng):
    inst = random_tree_instance(rng, n_vars=4, states=3)
    beliefs = [rng.dirichlet(np.ones(3)) for _ in inst.constraints]
    x = tuple(int(rng.integers(d)) for d in inst.domain_sizes)
    parts = [
        expected_constraint_value(t, b, inst.restrict(x, j))
        for j, (t, b) in enumerate(zip(inst.tables, beliefs))
    ]
    assert expected_total_value(inst, beliefs, x) == sum(parts)


def test_total_value_two_constraints():
    inst = Instance(
        ("a", "b"),
        (("x",), ("y",)),
        (
            Constraint(0, (0,), 2, np.array([10.0, 20.0])),
            Constraint(1, (1,), 1, np.array([7.0])),
        ),
    )
    assert expected_total_value(inst, [[0.5, 0.5], [1.0]], (0, 0)) == 22.0


def test_total_value_needs_one_belief_per_constraint():
    with pytest.raises(ValueError):
        expected_total_value(two_agent(), [], (0, 0))


def test_single_state_equals_deterministic_value(rng):
    inst = random_tree_instance(rng, n_vars=3, states=1)
    x = tuple(0 for _ in inst.agents)
    beliefs = [[1.0] for _ in inst.constraints]
    states = [0] * inst.num_constraints
    assert expected_total_value(inst, beliefs, x) == deterministic_value(inst, states, x)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    lam=st.floats(0.0, 1.0),
)
def test_expected_value_is_linear_in_belief(seed, lam):
    rng = np.random.default_rng(seed)
    table = rng.normal(0, 100, size=(4, 3))
    b1, b2 = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
    mix = lam * b1 + (1 - lam) * b2
    mix = mix / mix.sum()
    lhs = expected_constraint_value(table, mix, (1,))
    rhs = lam * expected_constraint_value(table, b1, (1,)) + (1 - lam) * expected_constraint_value(table, b2, (1,))
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_check_assignment():
    inst = two_agent()
    assert check_assignment(inst, [1, 0]) == (1, 0)
    with pytest.raises(ValueError):
        check_assignment(inst, [0])
    with pytest.raises(ValueError):
        check_assignment(inst, [0, 2])


def test_check_belief():
    assert np.array_equal(check_belief([0.25, 0.75], 2), [0.25, 0.75])
    with pytest.raises(ValueError):
        check_belief([0.5, 0.6], 2)
    with pytest.raises(ValueError):
        check_belief([1.2, -0.2], 2)


def test_point_mass_and_sentinel():
    assert point_mass(3, 1).tolist() == [0.0, 1.0, 0.0]
    assert NEG_INFINITY < -1e300


def test_labels_and_restrict():
    inst = two_agent()
    assert inst.labels((1, 0)) == {"a": "y", "b": "u"}
    assert inst.restrict((1, 0), 0) == (1, 0)
    assert inst.joint_space_size() == 4
