"""Estimator-style wrappers: configure in the constructor, ``fit`` an instance.

Fitted solvers expose ``assignment_``, ``regret_``, ``n_iter_``,
``n_witnesses_`` and the raw ``result_``. Parameters follow scikit-learn
conventions, so ``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .icg import DEFAULT_MAX_ITER, TOL, icg_maxsum
from .factor_graph import DEFAULT_MAX_ROUNDS
from .model import Instance, check_instance
from .reference import ENUMERATION_GUARD, centralized_icg, dsa_minimax, minimax_oracle


class _Solver(BaseEstimator):
    def _validate(self, instance):
        if not isinstance(instance, Instance):
            raise TypeError(f"expected an Instance, got {type(instance).__name__}")
        return check_instance(instance)

    def _store(self, result, assignment, regret, n_iter, n_witnesses):
        self.result_ = result
        self.assignment_ = tuple(assignment)
        self.regret_ = float(regret)
        self.n_iter_ = int(n_iter)
        self.n_witnesses_ = int(n_witnesses)
        return self

    def labels(self, instance: Instance) -> dict[str, str]:
        """The fitted assignment as agent id -> domain label."""
        check_is_fitted(self, "assignment_")
        return instance.labels(self.assignment_)


class ICGMaxSum(_Solver):
    """Decentralised ICG with vector Max-Sum masters and scalar Max-Sum subproblems.

    The default ``mode="pareto"`` is exact on trees. For large instances
    ``mode="dual", dual_iters=1, extra_cuts=3`` is much faster.
    """

    def __init__(
        self,
        max_iter: int = DEFAULT_MAX_ITER,
        tol: float = TOL,
        mode: str = "pareto",
        dual_iters: int = 20,
        extra_cuts: int = 0,
        allow_cycles: bool = False,
        max_rounds: int = DEFAULT_MAX_ROUNDS,
        time_limit: float | None = None,
    ):
        self.max_iter = max_iter
        self.tol = tol
        self.mode = mode
        self.dual_iters = dual_iters
        self.extra_cuts = extra_cuts
        self.allow_cycles = allow_cycles
        self.max_rounds = max_rounds
        self.time_limit = time_limit

    def fit(self, instance: Instance, y=None):
        self._validate(instance)
        res = icg_maxsum(
            instance,
            max_iter=self.max_iter,
            tol=self.tol,
            mode=self.mode,
            dual_iters=self.dual_iters,
            extra_cuts=self.extra_cuts,
            allow_cycles=self.allow_cycles,
            max_rounds=self.max_rounds,
            time_limit=self.time_limit,
        )
        self.max_regret_ = res.max_regret
        return self._store(res, res.assignment, res.regret, len(res.iterations), res.num_witnesses)


class CentralizedICG(_Solver):
    """ICG with both problems solved by enumeration; the scalability baseline."""

    def __init__(
        self,
        max_iter: int = DEFAULT_MAX_ITER,
        tol: float = TOL,
        guard: int = ENUMERATION_GUARD,
        time_limit: float | None = None,
    ):
        self.max_iter = max_iter
        self.tol = tol
        self.guard = guard
        self.time_limit = time_limit

    def fit(self, instance: Instance, y=None):
        self._validate(instance)
        res = centralized_icg(
            instance, max_iter=self.max_iter, tol=self.tol, guard=self.guard,
            time_limit=self.time_limit,
        )
        self.max_regret_ = res.max_regret
        return self._store(res, res.assignment, res.regret, len(res.iterations), res.num_witnesses)


class DSAMinimax(_Solver):
    """DSA-B local search baseline; ``regret_`` is the exact max regret of its answer."""

    def __init__(
        self,
        p: float = 0.6,
        inner_iters: int = 50,
        outer_iters: int = 20,
        seed: int = 0,
        guard: int = ENUMERATION_GUARD,
        time_limit: float | None = None,
    ):
        self.p = p
        self.inner_iters = inner_iters
        self.outer_iters = outer_iters
        self.seed = seed
        self.guard = guard
        self.time_limit = time_limit  # accepted for a uniform interface; DSA runs a fixed budget

    def fit(self, instance: Instance, y=None):
        self._validate(instance)
        res = dsa_minimax(
            instance, p=self.p, inner_iters=self.inner_iters, outer_iters=self.outer_iters,
            seed=self.seed, guard=self.guard,
        )
        self.max_regret_ = res.regret
        return self._store(res, res.assignment, res.regret, self.outer_iters, self.outer_iters)


class MinimaxOracle(_Solver):
    """Exhaustive minimax-regret solution, for small instances only."""

    def __init__(self, guard: int = ENUMERATION_GUARD, time_limit: float | None = None):
        self.guard = guard
        self.time_limit = time_limit

    def fit(self, instance: Instance, y=None):
        self._validate(instance)
        res = minimax_oracle(instance, guard=self.guard)
        self.max_regret_ = res.regret
        return self._store(res, res.assignment, res.regret, 1, 1)


SOLVERS = {
    "icg-maxsum": ICGMaxSum,
    "icg-exact": CentralizedICG,
    "dsa": DSAMinimax,
    "oracle": MinimaxOracle,
}


def make_solver(name: str, **params) -> _Solver:
    """Solver by its command-line name; unknown ``params`` raise ``ValueError``."""
    try:
        cls = SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(SOLVERS)}") from None
    solver = cls()
    valid = solver.get_params()
    bad = sorted(set(params) - set(valid))
    if bad:
        raise ValueError(f"{name}: unknown parameters {bad}")
    return solver.set_params(**params)

