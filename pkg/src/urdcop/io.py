"""JSON file formats for instances, hidden states and solutions.

Floats are written with 17 significant digits so a load/save cycle is exact.
Tables are nested arrays, state first and then the scope in order.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .icg import IterationRecord, SolveResult
from .model import Constraint, Instance, InstanceError, check_assignment, validate_instance

INSTANCE_VERSION = "urdcop-instance/1"
STATES_VERSION = "urdcop-states/1"
SOLUTION_VERSION = "urdcop-solution/1"


class FormatError(ValueError):
    """A file that is not valid JSON or lacks a required field."""


def _num(v: float) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError("non-finite number cannot be written")
    text = "%.17g" % v
    return text if any(c in text for c in ".e") else text + ".0"


def _encode(obj: Any, indent: int = 0, depth: int = 0) -> str:
    """JSON text; containers in the top two levels are broken over lines."""
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    pad, inner = " " * (indent * (depth + 1)), " " * (indent * depth)
    nested = isinstance(obj, dict) or any(isinstance(v, (dict, list, tuple)) for v in obj)
    wrap = indent and depth < 2 and nested
    sep = ",\n" + pad if wrap else ", "
    if isinstance(obj, dict):
        items = [f"{json.dumps(str(k))}: {_encode(v, indent, depth + 1)}" for k, v in obj.items()]
        if not items:
            return "{}"
        return "{\n" + pad + sep.join(items) + "\n" + inner + "}" if wrap else "{" + sep.join(items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [_encode(v, indent, depth + 1) for v in obj]
        if not items:
            return "[]"
        return "[\n" + pad + sep.join(items) + "\n" + inner + "]" if wrap else "[" + sep.join(items) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return _encode(obj, indent=2) + "\n"


def _read_json(path) -> Any:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _field(obj: Any, key: str, where: str, kind=None):
    if not isinstance(obj, dict):
        raise FormatError(f"{where or 'document'}: expected an object")
    if key not in obj:
        raise FormatError(f"{where or 'document'}: missing field {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        name = f"{where}.{key}" if where else key
        raise FormatError(f"{name}: expected {'a list' if kind is list else 'an object'}")
    return value


def _flatten(nested, where: str) -> list[float]:
    out = []
    stack = [nested]
    while stack:
        item = stack.pop()
        if isinstance(item, list):
            stack.extend(reversed(item))
        elif isinstance(item, (int, float)) and not isinstance(item, bool):
            out.append(float(item))
        else:
            raise FormatError(f"{where}: table entries must be numbers")
    return out


# -- instances ------------------------------------------------------------


def instance_to_dict(instance: Instance) -> dict:
    return {
        "version": INSTANCE_VERSION,
        "name": instance.name,
        "agents": [
            {"id": a, "domain": list(d)} for a, d in zip(instance.agents, instance.domains)
        ],
        "constraints": [
            {
                "id": c.id,
                "scope": [instance.agents[a] for a in c.scope],
                "num_states": c.num_states,
                "table": t.tolist(),
            }
            for c, t in zip(instance.constraints, instance.tables)
        ],
    }


def instance_from_dict(doc: Any) -> Instance:
    """Parse and validate; raises :class:`FormatError` or :class:`InstanceError`."""
    version = _field(doc, "version", "")
    if version != INSTANCE_VERSION:
        raise FormatError(f"version: expected {INSTANCE_VERSION!r}, got {version!r}")
    agents_raw = _field(doc, "agents", "", list)
    agents, domains = [], []
    for k, a in enumerate(agents_raw):
        agents.append(str(_field(a, "id", f"agents[{k}]")))
        domains.append([str(v) for v in _field(a, "domain", f"agents[{k}]", list)])
    index = {a: i for i, a in enumerate(agents)}
    constraints = []
    for k, c in enumerate(_field(doc, "constraints", "", list)):
        where = f"constraints[{k}]"
        scope = []
        for a in _field(c, "scope", where, list):
            # unknown ids become out-of-range indices so validation names them
            scope.append(index.get(str(a), len(agents)))
        num_states = _field(c, "num_states", where)
        if not isinstance(num_states, int) or isinstance(num_states, bool):
            raise FormatError(f"{where}.num_states: expected an integer")
        table = _flatten(_field(c, "table", where), f"{where}.table")
        constraints.append(Constraint(_field(c, "id", where), tuple(scope), num_states, table))
    instance = Instance(agents, domains, constraints, name=str(doc.get("name", "")))
    violations = validate_instance(instance)
    if violations:
        raise InstanceError(violations)
    return instance


def load_instance(path) -> Instance:
    return instance_from_dict(_read_json(path))


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(instance)), encoding="utf-8")


def states_path(instance_path) -> Path:
    """Sibling file holding the hidden true states of an instance."""
    p = Path(instance_path)
    return p.with_name(p.stem + ".states.json")


def save_states(states: Sequence[int], path, instance: Instance | None = None) -> None:
    doc = {"version": STATES_VERSION, "states": [int(s) for s in states]}
    if instance is not None:
        doc["instance"] = instance.name
    Path(path).write_text(dumps(doc), encoding="utf-8")


def load_states(path) -> list[int]:
    doc = _read_json(path)
    return [int(s) for s in _field(doc, "states", "", list)]


# -- solutions ------------------------------------------------------------


def solution_to_dict(
    instance: Instance,
    assignment: Sequence[int],
    *,
    algorithm: str,
    regret: float,
    max_regret: float = math.nan,
    iterations: Sequence[IterationRecord] = (),
) -> dict:
    return {
        "version": SOLUTION_VERSION,
        "instance": instance.name,
        "algorithm": algorithm,
        "assignment": instance.labels(check_assignment(instance, assignment)),
        "regret": regret,
        "max_regret": max_regret,
        "trace": [
            {"delta": r.delta, "delta_prime": r.delta_prime, "added": r.added, "witnesses": r.num_witnesses}
            for r in iterations
        ],
    }


def result_to_dict(instance: Instance, result: SolveResult) -> dict:
    return solution_to_dict(
        instance, result.assignment, algorithm=result.algorithm, regret=result.regret,
        max_regret=result.max_regret, iterations=result.iterations,
    )


def _clean(value):
    # JSON has no infinities; the bootstrap delta is written as null
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_clean(v) for v in value]
    return value


def save_solution(doc: dict, path) -> None:
    Path(path).write_text(dumps(_clean(doc)), encoding="utf-8")


def load_solution(path, instance: Instance) -> tuple[tuple[int, ...], dict]:
    """Assignment of ``instance`` stored in a solution file, plus the raw document."""
    doc = _read_json(path)
    labels = _field(doc, "assignment", "", dict)
    x = []
    for i, agent in enumerate(instance.agents):
        if agent not in labels:
            raise FormatError(f"assignment: missing agent {agent!r}")
        value = str(labels[agent])
        try:
            x.append(instance.domains[i].index(value))
        except ValueError:
            raise FormatError(f"assignment.{agent}: {value!r} is not in the agent's domain") from None
    return check_assignment(instance, x), doc
