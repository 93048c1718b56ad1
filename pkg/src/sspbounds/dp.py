"""Dynamic programming engine: backups, value iteration, policy iteration.

Everything operates on cost-minimization instances. Value functions are
plain float arrays with the terminal entry pinned to exactly 0; the helpers
here check that invariant at entry and preserve it on the way out.

All summations use a fixed order, so repeated runs are bitwise
reproducible and ``policy_backup(greedy_policy(J), J)`` equals
``bellman_backup(J)`` exactly, not just within rounding.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    DeterministicPolicy,
    Policy,
    SspProblem,
    StochasticPolicy,
    check_policy,
    check_values,
)
from .errors import ImproperPolicy, MaxItersExceeded, SingularSystem
from .properness import is_proper

# A value function solved from the linear system carries roughly 1e-10
# error, so uniform improvability is tested with a 1e-9 slack that absorbs
# it without masking real violations.
IMPROVABLE_TOL = 1e-9

# Exact policy evaluation refines its solution until the fixed-point
# residual is at most this.
EVAL_RESIDUAL_TOL = 1e-10

# Policy iteration also stops when two successive value functions agree to
# this tolerance, guarding against cycling among equal-value policies.
POLICY_VALUE_TOL = 1e-12


class ResidualStats(NamedTuple):
    """Extremes of the one-step change TJ - J and their max magnitude."""

    residual: float
    min_change: float
    max_change: float


@dataclass(frozen=True)
class IterationRecord:
    """One solver iteration: the value function and how it was reached.

    ``residual`` and the change extremes describe the Bellman residual of
    the *previous* iterate, i.e. the backup that produced this row; they are
    None on row 0.
    """

    iteration: int
    values: np.ndarray
    residual: float | None
    min_change: float | None
    max_change: float | None
    elapsed: float


@dataclass
class IterationTrace:
    records: list[IterationRecord]

    def __len__(self) -> int:
        return len(self.records)

    def residuals(self) -> list[float | None]:
        return [r.residual for r in self.records]

    def to_csv(self, j_under=None, m=None, error=None) -> str:
        """Render as CSV with columns iter, J_under, m, residual, error.

        The optional per-row columns come from the bounds machinery; absent
        entries are left blank. Floats are printed with 6 significant digits.
        """

        def fmt(x) -> str:
            return "" if x is None else f"{x:.6g}"

        def col(seq, k):
            return None if seq is None else seq[k]

        lines = ["iter,J_under,m,residual,error"]
        for k, rec in enumerate(self.records):
            lines.append(
                ",".join(
                    [
                        str(rec.iteration),
                        fmt(col(j_under, k)),
                        fmt(col(m, k)),
                        fmt(rec.residual),
                        fmt(col(error, k)),
                    ]
                )
            )
        return "\n".join(lines) + "\n"


def action_values(problem: SspProblem, values: np.ndarray) -> np.ndarray:
    """Backed-up cost of every (state, action) pair against ``values``."""
    values = check_values(problem, values)
    return np.einsum("suj,suj->su", problem.prob, problem.cost + values[None, None, :])


def bellman_backup(problem: SspProblem, values: np.ndarray) -> np.ndarray:
    """One application of the optimal backup: minimize action values per state."""
    return action_values(problem, values).min(axis=1)


def policy_backup(
    problem: SspProblem, policy: DeterministicPolicy, values: np.ndarray
) -> np.ndarray:
    """One application of the fixed-policy backup for a deterministic policy."""
    check_policy(problem, policy)
    q = action_values(problem, values)
    return q[np.arange(problem.num_states), policy.actions]


def stochastic_policy_backup(
    problem: SspProblem, policy: StochasticPolicy, values: np.ndarray
) -> np.ndarray:
    """Fixed-policy backup averaged over the policy's action weights."""
    check_policy(problem, policy)
    q = action_values(problem, values)
    return np.einsum("su,su->s", policy.weights, q)


def _backup_under(problem: SspProblem, policy: Policy, values: np.ndarray) -> np.ndarray:
    if isinstance(policy, DeterministicPolicy):
        return policy_backup(problem, policy, values)
    return stochastic_policy_backup(problem, policy, values)


def greedy_policy(problem: SspProblem, values: np.ndarray) -> DeterministicPolicy:
    """Pick the action minimizing the one-step backup in every state.

    Ties break toward the lowest action index, so the result is identical
    across runs and platforms.
    """
    q = action_values(problem, values)
    return DeterministicPolicy(actions=np.argmin(q, axis=1))


def bellman_residual(problem: SspProblem, values: np.ndarray) -> ResidualStats:
    """Max-norm Bellman residual of ``values`` plus the signed change extremes."""
    diff = bellman_backup(problem, values) - values
    min_change = float(diff.min())
    max_change = float(diff.max())
    return ResidualStats(max(-min_change, max_change), min_change, max_change)


def is_uniformly_improvable(
    problem: SspProblem, values: np.ndarray, tol: float = IMPROVABLE_TOL
) -> bool:
    """True when one backup does not increase the value at any state."""
    return bool((bellman_backup(problem, values) <= values + tol).all())


def value_iteration(
    problem: SspProblem,
    initial_values: np.ndarray,
    epsilon: float,
    max_iters: int = 10_000,
) -> tuple[np.ndarray, IterationTrace]:
    """Apply the optimal backup until the Bellman residual drops below epsilon.

    The returned value function J satisfies ||TJ - J|| < epsilon; in
    particular, when the initial values are already that accurate they come
    back unchanged after zero iterations. Each trace record stores the
    residual of the backup that produced it. Raises
    :class:`MaxItersExceeded`, carrying the partial trace, when the budget
    runs out; the last iterate is still a valid input for bound
    computations.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    values = check_values(problem, initial_values).copy()
    start = time.perf_counter()
    records = [
        IterationRecord(0, values.copy(), None, None, None, 0.0)
    ]
    for k in range(1, max_iters + 1):
        candidate = bellman_backup(problem, values)
        diff = candidate - values
        min_change = float(diff.min())
        max_change = float(diff.max())
        residual = max(-min_change, max_change)
        if residual < epsilon:
            return values, IterationTrace(records)
        values = candidate
        records.append(
            IterationRecord(
                k, values.copy(), residual, min_change, max_change,
                time.perf_counter() - start,
            )
        )
    trace = IterationTrace(records)
    if bellman_residual(problem, values).residual < epsilon:
        return values, trace
    raise MaxItersExceeded(
        f"value iteration did not reach residual {epsilon:g} in {max_iters} iterations",
        values,
        trace,
    )


def evaluate_policy(problem: SspProblem, policy: Policy) -> np.ndarray:
    """Exact cost-to-go of a proper policy.

    Solves the linear system (I - P) J = g restricted to nonterminal
    states, where P and g are the policy's transition kernel and one-step
    costs, then refines until the fixed-point residual is at most 1e-10.

    Raises :class:`ImproperPolicy` when the terminal state is unreachable
    from some state, and :class:`SingularSystem` if the solve fails
    numerically (which a proper policy should never cause).
    """
    report = is_proper(problem, policy)
    if not report.proper:
        raise ImproperPolicy(report.unreachable_states)

    from .core import policy_cost_vector, policy_transition_matrix

    kernel = policy_transition_matrix(problem, policy)
    one_step = policy_cost_vector(problem, policy)
    nt = problem.nonterminal
    system = np.eye(len(nt)) - kernel[np.ix_(nt, nt)]
    rhs = one_step[nt]

    values = np.zeros(problem.num_states)
    try:
        solution = np.linalg.solve(system, rhs)
        values[nt] = solution
        for _ in range(5):
            residual = np.abs(_backup_under(problem, policy, values) - values).max()
            if residual <= EVAL_RESIDUAL_TOL:
                return values
            correction = np.linalg.solve(system, rhs - system @ values[nt])
            values[nt] += correction
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"policy evaluation failed: {exc}") from exc
    residual = np.abs(_backup_under(problem, policy, values) - values).max()
    if residual > EVAL_RESIDUAL_TOL:
        raise SingularSystem(
            f"policy evaluation residual {residual:.3e} exceeds {EVAL_RESIDUAL_TOL:g}"
        )
    return values


def policy_iteration(
    problem: SspProblem,
    initial_policy: Policy,
    max_iters: int = 1_000,
) -> tuple[DeterministicPolicy, np.ndarray, IterationTrace]:
    """Alternate exact evaluation and greedy improvement from a proper policy.

    Stops when the improved policy repeats or two successive value
    functions agree within 1e-12 in max norm. Starting from a proper
    policy, every iterate is proper and its value is elementwise no worse
    than its predecessor's. Trace row 0 holds the initial policy's
    evaluation; row k holds the k-th improved policy's evaluation together
    with the Bellman residual of row k-1's values.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    start = time.perf_counter()
    values = evaluate_policy(problem, initial_policy)
    records = [IterationRecord(0, values, None, None, None, time.perf_counter() - start)]
    previous: DeterministicPolicy | None = (
        initial_policy if isinstance(initial_policy, DeterministicPolicy) else None
    )
    for k in range(1, max_iters + 1):
        q = action_values(problem, values)
        improved = DeterministicPolicy(actions=np.argmin(q, axis=1))
        diff = q.min(axis=1) - values
        min_change = float(diff.min())
        max_change = float(diff.max())
        residual = max(-min_change, max_change)
        elapsed = time.perf_counter() - start
        if previous is not None and np.array_equal(improved.actions, previous.actions):
            records.append(
                IterationRecord(k, values, residual, min_change, max_change, elapsed)
            )
            return previous, values, IterationTrace(records)
        new_values = evaluate_policy(problem, improved)
        records.append(
            IterationRecord(
                k, new_values, residual, min_change, max_change,
                time.perf_counter() - start,
            )
        )
        if np.abs(new_values - values).max() < POLICY_VALUE_TOL:
            return improved, new_values, IterationTrace(records)
        previous, values = improved, new_values
    raise MaxItersExceeded(
        f"policy iteration did not converge in {max_iters} improvements",
        values,
        IterationTrace(records),
    )
