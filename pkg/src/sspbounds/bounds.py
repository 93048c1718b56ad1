"""Certified suboptimality bounds from the Bellman residual.

Every bound here has the form  |J*(i) - J(i)| <= ||TJ - J|| * N(i),  where
N(i) upper-bounds the expected number of transitions until termination.
Three procedures produce N(i):

* ``steps_bound_positive_costs``: closed form (J(i) - a) / b + 1 when every
  nonterminal transition cost is positive, a being the cheapest transition
  into the terminal and b the cheapest other transition.
* ``steps_bound_all_proper``: exact solve of the companion instance that
  pays -1 per step, valid when all policies are proper.
* ``termination_horizon`` + ``steps_bound_from_horizon``: a stage count m
  by which any policy no costlier than J must terminate with positive
  probability, turned into the (very loose) bound m / rho_m.

``monte_carlo_steps`` is the sampling oracle used to sanity-check all of
them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Policy, SspProblem, check_values, policy_transition_matrix
from .dp import bellman_backup, bellman_residual, policy_iteration
from .errors import (
    HorizonCapExceeded,
    InfiniteStepsBound,
    NonpositiveCost,
    NoTerminalTransition,
    NotAllPoliciesProper,
    NotUniformlyImprovable,
)
from .properness import all_policies_proper, uniform_random_policy

logger = logging.getLogger(__name__)

IMPROVABLE_TOL = 1e-9

# Safety cap for the horizon search. Hitting it means some policy can delay
# termination forever at nonpositive cost, i.e. the instance admits an
# improper policy whose cost never diverges.
DEFAULT_HORIZON_CAP = 10**6

METHODS = ("positive-cost", "all-proper", "general-loose", "override")


class MonteCarloSteps(NamedTuple):
    """Sample mean steps-to-termination with a 95% half-width.

    Rollouts that hit the cap are counted in ``capped`` and excluded from
    the mean; ``mean`` and ``ci95`` are NaN when nothing completed.
    """

    mean: float
    ci95: float
    completed: int
    capped: int


@dataclass(frozen=True)
class HorizonCertificate:
    """Output of the termination-horizon search.

    ``inevitable_by_stage[k]`` is the set of states from which termination
    within k stages has positive probability under every policy;
    ``values_by_stage[k]`` holds the cheapest k-stage cost of avoiding
    termination (NaN on the inevitable set). Any policy whose cost-to-go is
    elementwise at most the reference values terminates within ``m`` stages
    with positive probability from every state.
    """

    m: int
    inevitable_by_stage: tuple[frozenset[int], ...]
    values_by_stage: tuple[np.ndarray, ...]
    min_terminal_cost: float

    def to_json_dict(self) -> dict:
        stages = []
        for k, (inevitable, vals) in enumerate(
            zip(self.inevitable_by_stage, self.values_by_stage)
        ):
            stages.append(
                {
                    "stage": k,
                    "inevitable": sorted(inevitable),
                    "values": [None if math.isnan(v) else v for v in vals.tolist()],
                }
            )
        return {
            "m": self.m,
            "min_terminal_cost": self.min_terminal_cost,
            "stages": stages,
        }


@dataclass(frozen=True)
class BoundsReport:
    """Everything needed to certify a value function's suboptimality.

    ``steps_bound`` has the override rule already applied: states that can
    only jump straight to the terminal get N(i) = 1 regardless of the
    producing method and are excluded from the max behind ``global_bound``.
    """

    residual: float
    min_change: float
    max_change: float
    steps_bound: np.ndarray
    per_state_bound: np.ndarray
    global_bound: float
    overrides: tuple[int, ...]
    method: str

    def to_json_dict(self) -> dict:
        def enc(x: float):
            return "inf" if math.isinf(x) else x

        return {
            "residual": self.residual,
            "min_change": self.min_change,
            "max_change": self.max_change,
            "steps_bound": [enc(v) for v in self.steps_bound.tolist()],
            "per_state_bound": [enc(v) for v in self.per_state_bound.tolist()],
            "global_bound": enc(self.global_bound),
            "overrides": list(self.overrides),
            "method": self.method,
        }


def require_uniformly_improvable(problem: SspProblem, values: np.ndarray) -> None:
    """Raise :class:`NotUniformlyImprovable` unless one backup keeps TJ <= J."""
    backed_up = bellman_backup(problem, values)
    bad = np.nonzero(backed_up > values + IMPROVABLE_TOL)[0]
    if bad.size:
        raise NotUniformlyImprovable(int(i) for i in bad)


def immediate_termination_states(problem: SspProblem) -> np.ndarray:
    """Boolean mask of nonterminal states whose every action jumps to the terminal.

    Such a state terminates in exactly one step under any policy, so its
    steps bound can be overridden to 1.
    """
    mass_to_nonterminal = problem.prob.sum(axis=2) - problem.prob[:, :, problem.terminal]
    mask = (mass_to_nonterminal == 0.0).all(axis=1)
    mask[problem.terminal] = False
    return mask


def _min_terminal_cost(problem: SspProblem) -> float:
    """Cheapest transition into the terminal from a nonterminal state."""
    t = problem.terminal
    entries = problem.prob[:, :, t] > 0.0
    entries[t, :] = False
    if not entries.any():
        raise NoTerminalTransition()
    return float(problem.cost[:, :, t][entries].min())


def _steps_product(change: float, steps: np.ndarray) -> np.ndarray:
    """change * steps under extended-real rules: a zero extreme kills infinities."""
    if change == 0.0:
        return np.zeros_like(steps)
    infinite = np.isinf(steps)
    if infinite.any():
        raise InfiniteStepsBound(int(i) for i in np.nonzero(infinite)[0])
    return change * steps


def sandwich_bounds(
    problem: SspProblem,
    values: np.ndarray,
    steps_optimal: np.ndarray,
    steps_greedy: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided envelope around the optimal values and the greedy policy's.

    With c- and c+ the signed extremes of TJ - J, returns

        lower(i) = J(i) + c- * steps_optimal(i)
        upper(i) = J(i) + c+ * steps_greedy(i)

    which satisfy lower <= J* <= J_greedy <= upper, where steps_optimal
    bounds the expected steps-to-termination of an optimal policy and
    steps_greedy that of the greedy policy. Raises
    :class:`InfiniteStepsBound` when an infinite entry meets a nonzero
    extreme.
    """
    values = check_values(problem, values)
    steps_optimal = np.asarray(steps_optimal, dtype=float)
    steps_greedy = np.asarray(steps_greedy, dtype=float)
    for steps in (steps_optimal, steps_greedy):
        if steps.shape != values.shape:
            raise ValueError("steps bounds must have one entry per state")
        if (steps < 0).any() or np.isnan(steps).any():
            raise ValueError("steps bounds must be nonnegative")
    stats = bellman_residual(problem, values)
    lower = values + _steps_product(stats.min_change, steps_optimal)
    upper = values + _steps_product(stats.max_change, steps_greedy)
    return lower, upper


def per_state_suboptimality(
    problem: SspProblem, values: np.ndarray, steps_bound: np.ndarray
) -> np.ndarray:
    """Per-state bound ||TJ - J|| * N(i) on |J*(i) - J(i)|.

    Requires a uniformly improvable J; the same numbers then also bound the
    suboptimality of the greedy policy, whose cost-to-go is no worse than J.
    Infinite N entries yield infinite (vacuous) bounds.
    """
    values = check_values(problem, values)
    require_uniformly_improvable(problem, values)
    steps_bound = np.asarray(steps_bound, dtype=float)
    return bellman_residual(problem, values).residual * steps_bound


def global_suboptimality(
    problem: SspProblem, values: np.ndarray, steps_bound: np.ndarray
) -> float:
    """Bound ||TJ - J|| * max_i N(i) on the max-norm distance to optimal.

    The max skips overridden states (see
    :func:`immediate_termination_states`); when every nonterminal state is
    overridden the factor is 1.
    """
    values = check_values(problem, values)
    require_uniformly_improvable(problem, values)
    steps_bound = np.asarray(steps_bound, dtype=float)
    mask = np.ones(problem.num_states, dtype=bool)
    mask[problem.terminal] = False
    mask &= ~immediate_termination_states(problem)
    factor = float(steps_bound[mask].max()) if mask.any() else 1.0
    return bellman_residual(problem, values).residual * factor


def steps_bound_positive_costs(
    problem: SspProblem, values: np.ndarray, refine_step_cost: bool = False
) -> np.ndarray:
    """Closed-form steps bound N(i) = (J(i) - a) / b + 1 for positive step costs.

    Valid for any policy whose cost-to-go is elementwise at most the
    uniformly improvable J: a policy that lingered longer would already
    cost more than J. Here a is the cheapest transition into the terminal
    (its sign is unrestricted) and b the cheapest nonterminal transition,
    all of which must be strictly positive.

    With ``refine_step_cost`` the divisor becomes the minimum *expected*
    nonterminal transition cost per (state, action), a tighter but still
    valid value when step costs are non-uniform. The raw minimum is the
    default; the refinement is never substituted silently.

    Entries that come out below 1 are clamped to 1 (a nonterminal state
    needs at least one transition) and the clamp is logged.
    """
    values = check_values(problem, values)
    require_uniformly_improvable(problem, values)
    t = problem.terminal

    positive = problem.prob > 0.0
    nonterminal_moves = positive.copy()
    nonterminal_moves[t, :, :] = False
    nonterminal_moves[:, :, t] = False
    offending = np.argwhere(nonterminal_moves & (problem.cost <= 0.0))
    if offending.size:
        raise NonpositiveCost([tuple(map(int, o)) for o in offending])

    min_terminal_cost = _min_terminal_cost(problem)
    if refine_step_cost:
        masked_prob = np.where(nonterminal_moves, problem.prob, 0.0)
        mass = masked_prob.sum(axis=2)
        expected = np.einsum("suj,suj->su", masked_prob, problem.cost)
        with_mass = mass > 0.0
        min_step_cost = (
            float((expected[with_mass] / mass[with_mass]).min())
            if with_mass.any()
            else math.inf
        )
    else:
        step_costs = problem.cost[nonterminal_moves]
        min_step_cost = float(step_costs.min()) if step_costs.size else math.inf

    steps = np.zeros(problem.num_states)
    nt = problem.nonterminal
    steps[nt] = (values[nt] - min_terminal_cost) / min_step_cost + 1.0
    low = nt[steps[nt] < 1.0]
    if low.size:
        logger.warning(
            "clamping steps bound to 1 at states %s (value below cheapest "
            "terminal transition cost %.6g)",
            low.tolist(),
            min_terminal_cost,
        )
        steps[low] = 1.0
    return steps


def steps_bound_all_proper(problem: SspProblem) -> np.ndarray:
    """Steps bound valid for *every* policy, via the companion instance.

    The companion keeps the transition structure but pays 0 for entering
    the terminal and -1 for everything else, so minimizing its total cost
    maximizes the expected step count. Solvable, and the bound finite,
    exactly when all policies are proper.
    """
    report = all_policies_proper(problem)
    if not report.all_proper:
        raise NotAllPoliciesProper(report.witness_states, report.witness_actions)
    t = problem.terminal
    companion_cost = np.full(problem.cost.shape, -1.0)
    companion_cost[:, :, t] = 0.0
    companion_cost[t, :, :] = 0.0
    companion = SspProblem(
        num_states=problem.num_states,
        num_actions=problem.num_actions,
        terminal=t,
        prob=problem.prob,
        cost=companion_cost,
    )
    _, worst_values, _ = policy_iteration(companion, uniform_random_policy(companion))
    steps = np.zeros(problem.num_states)
    nt = problem.nonterminal
    steps[nt] = 1.0 - worst_values[nt]
    return steps


def termination_horizon(
    problem: SspProblem,
    values: np.ndarray,
    criterion: str = "text",
    max_stages: int | None = None,
) -> HorizonCertificate:
    """Find a stage count m by which low-cost policies must be able to terminate.

    Runs a finite-horizon recursion on the cheapest cost of *avoiding*
    termination. Stage k marks as inevitable the states whose every action
    risks entering the stage-(k-1) inevitable set, and backs up the
    avoidance cost elsewhere using only the risk-free actions. Once
    avoiding for k stages plus the cheapest terminal transition already
    exceeds the reference values everywhere, no policy at least as good as
    ``values`` can keep delaying, and m = k + 1 (or m = k when every state
    became inevitable first).

    ``criterion`` selects the stopping comparison: ``"text"`` adds the
    cheapest terminal-transition cost before comparing (the default),
    ``"pseudocode"`` compares the bare stage values and yields a larger m.

    Raises :class:`HorizonCapExceeded` after ``max_stages`` stages, which
    indicates a zero-cost way to delay termination forever.
    """
    values = check_values(problem, values)
    require_uniformly_improvable(problem, values)
    if criterion not in ("text", "pseudocode"):
        raise ValueError(f"criterion must be 'text' or 'pseudocode', got {criterion!r}")
    if max_stages is None:
        max_stages = DEFAULT_HORIZON_CAP
    min_terminal_cost = _min_terminal_cost(problem)
    offset = min_terminal_cost if criterion == "text" else 0.0
    t = problem.terminal

    inevitable = np.zeros(problem.num_states, dtype=bool)
    inevitable[t] = True
    stage_values = np.zeros(problem.num_states)

    def report_values() -> np.ndarray:
        out = stage_values.copy()
        out[inevitable] = np.nan
        return out

    inevitable_by_stage = [frozenset({t})]
    values_by_stage = [report_values()]

    k = 0
    while True:
        outside = ~inevitable
        if not outside.any():
            m = k
            break
        if (stage_values[outside] + offset > values[outside]).all():
            m = k + 1
            break
        if k >= max_stages:
            raise HorizonCapExceeded(k)
        k += 1
        # Actions are usable at stage k only if they carry no mass into the
        # stage-(k-1) inevitable set; stale values there get zero weight.
        mass_into = np.einsum("suj,j->su", problem.prob, inevitable.astype(float))
        usable = mass_into == 0.0
        can_avoid = usable.any(axis=1)
        joining = outside & ~can_avoid
        staying = outside & can_avoid
        backed = np.einsum(
            "suj,suj->su", problem.prob, problem.cost + stage_values[None, None, :]
        )
        backed = np.where(usable, backed, np.inf)
        new_values = stage_values.copy()
        new_values[staying] = backed[staying].min(axis=1)
        inevitable = inevitable | joining
        stage_values = new_values
        inevitable_by_stage.append(frozenset(int(i) for i in np.nonzero(inevitable)[0]))
        values_by_stage.append(report_values())

    return HorizonCertificate(
        m=m,
        inevitable_by_stage=tuple(inevitable_by_stage),
        values_by_stage=tuple(values_by_stage),
        min_terminal_cost=min_terminal_cost,
    )


def steps_bound_from_horizon(
    problem: SspProblem, certificate: HorizonCertificate
) -> np.ndarray:
    """Loose uniform steps bound m / rho_m from a horizon certificate.

    rho_m = p_n^(m-1) * p_t lower-bounds the probability of terminating
    within m stages, where p_t is the smallest nonzero probability of a
    transition into the terminal and p_n the smallest nonzero probability
    of any other transition. The resulting bound is sound but usually far
    looser than the cost-based bounds.
    """
    t = problem.terminal
    into_terminal = problem.prob[:, :, t].copy()
    into_terminal[t, :] = 0.0
    entries = into_terminal[into_terminal > 0.0]
    if entries.size == 0:
        raise NoTerminalTransition()
    p_terminal = float(entries.min())

    others = problem.prob.copy()
    others[t, :, :] = 0.0
    others[:, :, t] = 0.0
    other_entries = others[others > 0.0]
    p_nonterminal = float(other_entries.min()) if other_entries.size else 1.0

    rho = p_nonterminal ** (certificate.m - 1) * p_terminal
    steps = np.zeros(problem.num_states)
    steps[problem.nonterminal] = certificate.m / rho
    return steps


def monte_carlo_steps(
    problem: SspProblem,
    policy: Policy,
    start: int,
    trials: int,
    seed: int,
    cap: int = 10_000,
) -> MonteCarloSteps:
    """Estimate expected steps-to-termination by simulating rollouts.

    Simulates all trials as one batch against the policy's induced chain;
    the result is deterministic for a fixed seed. Rollouts still running
    after ``cap`` steps are reported in ``capped`` and excluded from the
    mean.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if cap < 1:
        raise ValueError("cap must be at least 1")
    if not 0 <= start < problem.num_states:
        raise IndexError(f"start state {start} out of range")
    t = problem.terminal
    if start == t:
        return MonteCarloSteps(0.0, 0.0, trials, 0)

    cumulative = policy_transition_matrix(problem, policy).cumsum(axis=1)
    rng = np.random.default_rng(seed)
    steps_taken = np.zeros(trials, dtype=int)
    finished = np.zeros(trials, dtype=bool)
    active = np.arange(trials)
    state = np.full(trials, start, dtype=int)

    for step in range(1, cap + 1):
        draws = rng.random(active.size)
        rows = cumulative[state]
        nxt = (rows <= draws[:, None]).sum(axis=1)
        np.minimum(nxt, problem.num_states - 1, out=nxt)
        arrived = nxt == t
        steps_taken[active[arrived]] = step
        finished[active[arrived]] = True
        active = active[~arrived]
        state = nxt[~arrived]
        if active.size == 0:
            break

    completed = int(finished.sum())
    capped = trials - completed
    if completed == 0:
        return MonteCarloSteps(math.nan, math.nan, 0, capped)
    samples = steps_taken[finished].astype(float)
    mean = float(samples.mean())
    ci95 = (
        0.0
        if completed < 2
        else float(1.96 * samples.std(ddof=1) / math.sqrt(completed))
    )
    return MonteCarloSteps(mean, ci95, completed, capped)


def resolve_method(problem: SspProblem, method: str = "auto") -> str:
    """Pick the steps-bound procedure for an instance.

    ``auto`` resolves to positive-cost when every nonterminal transition
    cost is positive, else all-proper when no improper policy exists, else
    the general horizon-based procedure.
    """
    if method != "auto":
        if method not in ("positive-cost", "all-proper", "general"):
            raise ValueError(f"unknown bounds method {method!r}")
        return method
    t = problem.terminal
    nonterminal_moves = problem.prob > 0.0
    nonterminal_moves[t, :, :] = False
    nonterminal_moves[:, :, t] = False
    if (problem.cost[nonterminal_moves] > 0.0).all():
        return "positive-cost"
    if all_policies_proper(problem).all_proper:
        return "all-proper"
    return "general"


def compute_bounds_report(
    problem: SspProblem,
    values: np.ndarray,
    method: str = "auto",
    horizon_cap: int | None = None,
) -> BoundsReport:
    """Assemble the full bounds report for a uniformly improvable value function."""
    values = check_values(problem, values)
    require_uniformly_improvable(problem, values)
    resolved = resolve_method(problem, method)
    if resolved == "positive-cost":
        steps = steps_bound_positive_costs(problem, values)
        label = "positive-cost"
    elif resolved == "all-proper":
        steps = steps_bound_all_proper(problem)
        label = "all-proper"
    else:
        certificate = termination_horizon(problem, values, max_stages=horizon_cap)
        steps = steps_bound_from_horizon(problem, certificate)
        label = "general-loose"

    overridden = immediate_termination_states(problem)
    steps = steps.astype(float).copy()
    steps[overridden] = 1.0
    stats = bellman_residual(problem, values)
    per_state = stats.residual * steps
    mask = np.ones(problem.num_states, dtype=bool)
    mask[problem.terminal] = False
    mask &= ~overridden
    factor = float(steps[mask].max()) if mask.any() else 1.0
    if not mask.any():
        label = "override"
    return BoundsReport(
        residual=stats.residual,
        min_change=stats.min_change,
        max_change=stats.max_change,
        steps_bound=steps,
        per_state_bound=per_state,
        global_bound=stats.residual * factor,
        overrides=tuple(int(i) for i in np.nonzero(overridden)[0]),
        method=label,
    )
