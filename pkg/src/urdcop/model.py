"""Uncertain-reward DCOP data model.

An instance holds agents (decision variables), their finite domains and a list
of soft constraints. Every constraint carries one random state variable with a
finite domain; its utility table is dense and indexed as
``table[state, x_j1, ..., x_jk]`` where each ``x_ji`` is an index into the
domain of the ``i``-th agent of the scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

NEG_INFINITY = -math.inf
SIMPLEX_TOL = 1e-9

Assignment = tuple[int, ...]
JointBelief = tuple[np.ndarray, ...]


class InstanceError(ValueError):
    """Raised when an instance fails validation."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid instance: " + "; ".join(self.violations))


@dataclass(frozen=True, eq=False)
class Constraint:
    id: int
    scope: tuple[int, ...]
    num_states: int
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(a) for a in self.scope))
        table = np.array(self.table, dtype=float)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def arity(self) -> int:
        return len(self.scope)


@dataclass(frozen=True, eq=False)
class Instance:
    """A UR-DCOP instance.

    ``agents`` are agent ids, ``domains[i]`` the value labels of agent ``i``
    (solvers only use positions in it), ``constraints`` the utility functions.
    Construction does not validate; call :func:`validate_instance` or
    :func:`check_instance`.
    """

    agents: tuple[str, ...]
    domains: tuple[tuple[str, ...], ...]
    constraints: tuple[Constraint, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(str(a) for a in self.agents))
        object.__setattr__(
            self, "domains", tuple(tuple(str(v) for v in d) for d in self.domains)
        )
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @cached_property
    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.domains)

    @cached_property
    def tables(self) -> tuple[np.ndarray, ...]:
        """Utility tables shaped ``(num_states, |D_j1|, ..., |D_jk|)``."""
        out = []
        for c in self.constraints:
            shape = (c.num_states,) + tuple(self.domain_sizes[a] for a in c.scope)
            t = c.table.reshape(shape)
            t.setflags(write=False)
            out.append(t)
        return tuple(out)

    def joint_space_size(self) -> int:
        return math.prod(self.domain_sizes)

    def restrict(self, x: Sequence[int], j: int) -> tuple[int, ...]:
        """Partial assignment of constraint ``j``'s scope."""
        return tuple(x[a] for a in self.constraints[j].scope)

    def labels(self, x: Sequence[int]) -> dict[str, str]:
        return {self.agents[i]: self.domains[i][v] for i, v in enumerate(x)}

    def with_tables(self, tables: Sequence[np.ndarray]) -> Instance:
        """Copy of this instance with every constraint's table replaced."""
        cons = tuple(
            Constraint(c.id, c.scope, np.asarray(t).shape[0], t)
            for c, t in zip(self.constraints, tables)
        )
        return Instance(self.agents, self.domains, cons, name=self.name)


def validate_instance(instance: Instance) -> list[str]:
    """Return every invariant violation; an empty list means the instance is ok."""
    violations = []
    n = instance.num_agents
    if len(set(instance.agents)) != n:
        seen = set()
        for a in instance.agents:
            if a in seen:
                violations.append(f"duplicate agent id {a!r}")
            seen.add(a)
    if len(instance.domains) != n:
        violations.append(
            f"{len(instance.domains)} domains given for {n} agents"
        )
    for i, d in enumerate(instance.domains[:n]):
        if len(d) == 0:
            violations.append(f"agent {instance.agents[i]!r}: empty domain")
    ids = [c.id for c in instance.constraints]
    if len(set(ids)) != len(ids):
        violations.append("duplicate constraint ids")
    for c in instance.constraints:
        where = f"constraint {c.id}"
        if not c.scope:
            violations.append(f"{where}: empty scope")
            continue
        bad = [a for a in c.scope if not 0 <= a < min(n, len(instance.domains))]
        if bad:
            violations.append(f"{where}: unknown agent in scope {bad}")
            continue
        if len(set(c.scope)) != len(c.scope):
            violations.append(f"{where}: duplicate agent in scope")
        if c.num_states < 1:
            violations.append(f"{where}: num_states must be >= 1")
            continue
        expected = c.num_states * math.prod(len(instance.domains[a]) for a in c.scope)
        if c.table.size != expected:
            violations.append(
                f"{where}: table size mismatch (expected {expected}, got {c.table.size})"
            )
        elif not np.all(np.isfinite(c.table)):
            violations.append(f"{where}: non-finite utility")
    return violations


def check_instance(instance: Instance) -> Instance:
    violations = validate_instance(instance)
    if violations:
        raise InstanceError(violations)
    return instance


def check_assignment(instance: Instance, x: Sequence[int]) -> Assignment:
    x = tuple(int(v) for v in x)
    if len(x) != instance.num_agents:
        raise ValueError(
            f"assignment covers {len(x)} agents, instance has {instance.num_agents}"
        )
    for i, v in enumerate(x):
        if not 0 <= v < instance.domain_sizes[i]:
            raise ValueError(f"value {v} outside the domain of agent {instance.agents[i]!r}")
    return x


def check_belief(b, num_states: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (num_states,):
        raise ValueError("belief/state arity mismatch")
    if np.any(b < -SIMPLEX_TOL) or abs(b.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("belief is not a probability distribution")
    return b


def point_mass(num_states: int, state: int) -> np.ndarray:
    b = np.zeros(num_states)
    b[state] = 1.0
    return b


def expected_constraint_value(
    constraint: Constraint | np.ndarray, belief, xj: Sequence[int]
) -> float:
    """Belief-weighted utility ``sum_s b(s) * U(s, xj)`` of one constraint.

    ``constraint`` may be a :class:`Constraint` whose table is already shaped
    ``(S, d1, ..., dk)`` or such a table directly.
    """
    table = constraint.table if isinstance(constraint, Constraint) else np.asarray(constraint)
    belief = np.asarray(belief, dtype=float)
    if belief.ndim != 1 or belief.shape[0] != table.shape[0]:
        raise ValueError("belief/state arity mismatch")
    xj = tuple(xj)
    if len(xj) != table.ndim - 1:
        raise ValueError("partial assignment does not cover the scope")
    return float(belief @ table[(slice(None),) + xj])


def expected_total_value(
    instance: Instance, beliefs: Sequence, x: Sequence[int]
) -> float:
    """Expected team value ``V(b, x)`` summed over all constraints."""
    if len(beliefs) != instance.num_constraints:
        raise ValueError(
            f"{len(beliefs)} beliefs given for {instance.num_constraints} constraints"
        )
    return sum(
        expected_constraint_value(t, b, instance.restrict(x, j))
        for j, (t, b) in enumerate(zip(instance.tables, beliefs))
    )


def deterministic_value(instance: Instance, states: Sequence[int], x: Sequence[int]) -> float:
    """Team value of ``x`` when every constraint's state is known."""
    return float(
        sum(t[(s,) + instance.restrict(x, j)] for j, (t, s) in enumerate(zip(instance.tables, states)))
    )
