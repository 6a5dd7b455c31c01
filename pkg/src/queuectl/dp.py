"""Exact average-cost dynamic programming for the rate-controlled queue.

The continuous-time chain on the truncated state space {0, .., q_max} is
uniformized at the dominating rate (arrival rate + fastest service rate)
and solved by relative value iteration. The resulting greedy policy is
monotone in the queue length and is recorded as switching thresholds.

The same truncated chain admits a closed-form stationary distribution for
any threshold policy (birth-death balance), which serves as an independent
oracle: exhaustive enumeration of monotone threshold policies through the
stationary solver must reproduce the DP gain.

One caveat when comparing against the event-driven simulator: the DP and
the birth-death solver let the service rate track the current queue length
continuously, while the simulator holds the rate chosen at service start
for that whole service. The two processes coincide exactly for policies
that are constant over the visited states (in particular the optimal
policy under rate-independent expected energy cost, which is constant), but
differ for genuinely state-dependent rate maps, where holding the rate
leaves the queue longer than the birth-death analysis predicts.

Action indices are 0-based positions into ``service_rates``; state 0 has
no service in progress, so its action is vacuous (ties break to index 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .env import EnvParams, QueueState, step

DEFAULT_Q_MAX = 500
DEFAULT_RVI_TOL = 1e-9
DEFAULT_BOUNDARY_FRAC = 0.05


class RviNotConverged(RuntimeError):
    def __init__(self, iterations: int, span: float):
        super().__init__(
            f"relative value iteration did not converge in {iterations} iterations "
            f"(final span {span:.3e})"
        )
        self.iterations = iterations
        self.span = span


class NonMonotonePolicy(RuntimeError):
    """The DP greedy policy is not nondecreasing on the interior states."""


@dataclass(frozen=True)
class TruncatedModel:
    arrival_rate: float
    service_rates: tuple[float, ...]
    holding_cost: float
    energy_cost: float
    q_max: int = DEFAULT_Q_MAX

    def __post_init__(self):
        if self.q_max < 2:
            raise ValueError("q_max must be at least 2")
        if self.arrival_rate <= 0 or any(mu <= 0 for mu in self.service_rates):
            raise ValueError("rates must be strictly positive")

    @classmethod
    def from_env(cls, params: EnvParams, q_max: int = DEFAULT_Q_MAX) -> "TruncatedModel":
        return cls(
            arrival_rate=params.arrival_rate,
            service_rates=params.service_rates,
            holding_cost=params.holding_cost,
            energy_cost=params.energy_cost,
            q_max=q_max,
        )

    @property
    def uniformization_rate(self) -> float:
        return self.arrival_rate + max(self.service_rates)

    @property
    def num_states(self) -> int:
        return self.q_max + 1

    def cost_rate(self, q: int, rate: float) -> float:
        """Instantaneous cost per unit time in state q while serving at ``rate``."""
        return self.holding_cost * q + (self.energy_cost * rate if q >= 1 else 0.0)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Monotone map from queue length to service-rate index.

    ``thresholds[j]`` is the smallest queue length at which rate index
    j + 1 (0-based) becomes active; the action for q is the number of
    thresholds less than or equal to q.
    """

    thresholds: tuple[int, ...]

    def __post_init__(self):
        if list(self.thresholds) != sorted(self.thresholds):
            raise ValueError("thresholds must be nondecreasing")

    @classmethod
    def constant(cls, action: int, num_actions: int) -> "ThresholdPolicy":
        """Policy using one rate for every queue length >= 1."""
        if not 0 <= action < num_actions:
            raise ValueError("action out of range")
        # Active rates switch at q=1 up to `action`, never beyond.
        return cls(tuple([1] * action + [2**31] * (num_actions - 1 - action)))

    def action_for(self, q: int) -> int:
        return int(np.searchsorted(self.thresholds, q, side="right"))

    def actions(self, q_max: int) -> np.ndarray:
        qs = np.arange(q_max + 1)
        return np.searchsorted(self.thresholds, qs, side="right").astype(int)


@dataclass
class DpSolution:
    gain: float  # optimal average cost per unit time (negate for reward)
    gain_per_epoch: float  # gain divided by the long-run decision-epoch rate
    bias: np.ndarray  # relative values, zero at the reference state 0
    policy: np.ndarray  # greedy action index per state
    iterations: int
    final_span: float

    @property
    def reward_per_time(self) -> float:
        return -self.gain

    @property
    def reward_per_epoch(self) -> float:
        return -self.gain_per_epoch


def relative_value_iteration(
    model: TruncatedModel,
    tol: float = DEFAULT_RVI_TOL,
    max_iter: int = 200_000,
) -> DpSolution:
    """Solve the uniformized average-cost problem by relative value iteration.

    Sweeps ``h <- min_a [c(s,a)/L + P_a h] - h(ref)`` with reference state
    0 until the span of successive differences drops below ``tol``; the
    per-time gain is the uniformization rate times the h-increment at the
    reference state. Ties in the greedy minimization break toward the
    lower rate index.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    big = model.uniformization_rate
    rates = np.array(model.service_rates)
    n = model.num_states
    qs = np.arange(n)

    p_up = model.arrival_rate / big
    p_down = rates / big  # per action
    up_idx = np.minimum(qs + 1, model.q_max)  # arrivals blocked at q_max
    down_idx = np.maximum(qs - 1, 0)  # at q=0 the service mass self-loops

    serving = (qs >= 1).astype(float)
    # stage costs, (A, S): holding everywhere, energy only while serving
    stage_cost = (
        model.holding_cost * qs[None, :]
        + model.energy_cost * rates[:, None] * serving[None, :]
    ) / big
    self_loop = 1.0 - p_up - p_down[:, None] * np.ones(n)[None, :]
    # action's service mass at q=0 portioned back to the self-loop via down_idx==0

    h = np.zeros(n)
    span = math.inf
    operands = None
    for it in range(1, max_iter + 1):
        operands = (
            stage_cost
            + p_up * h[up_idx][None, :]
            + p_down[:, None] * h[down_idx][None, :]
            + self_loop * h[None, :]
        )
        new_h = operands.min(axis=0)
        diff = new_h - h
        span = float(diff.max() - diff.min())
        gain_stage = float(diff[0])
        h = new_h - new_h[0]
        if span < tol:
            policy = operands.argmin(axis=0).astype(int)
            gain = big * gain_stage
            return DpSolution(
                gain=gain,
                gain_per_epoch=gain / model.arrival_rate,
                bias=h,
                policy=policy,
                iterations=it,
                final_span=span,
            )
    raise RviNotConverged(max_iter, span)


def extract_thresholds(
    solution: DpSolution,
    model: TruncatedModel,
    boundary_frac: float = DEFAULT_BOUNDARY_FRAC,
) -> ThresholdPolicy:
    """Record the greedy policy's switching points as thresholds.

    Verifies monotonicity on the interior states (a band of
    ``boundary_frac * q_max`` near the truncation bound is excluded, where
    the blocked-arrival boundary can distort the policy). State 0 carries
    no service, so thresholds are read from q >= 1.
    """
    interior_max = model.q_max - int(math.ceil(boundary_frac * model.q_max))
    actions = solution.policy[: interior_max + 1]
    if np.any(np.diff(actions[1:]) < 0):
        bad = 1 + int(np.where(np.diff(actions[1:]) < 0)[0][0])
        raise NonMonotonePolicy(
            f"greedy policy decreases between q={bad} and q={bad + 1} "
            f"(actions {actions[bad]} -> {actions[bad + 1]})"
        )
    num_actions = len(model.service_rates)
    thresholds = []
    for j in range(1, num_actions):
        active = np.where(actions[1:] >= j)[0]
        thresholds.append(int(active[0]) + 1 if active.size else model.q_max + 1)
    return ThresholdPolicy(tuple(thresholds))


@dataclass(frozen=True)
class StationaryResult:
    expected_q: float
    cost_per_time: float
    distribution: np.ndarray

    @property
    def reward_per_time(self) -> float:
        return -self.cost_per_time

    def reward_per_epoch(self, arrival_rate: float) -> float:
        return -self.cost_per_time / arrival_rate


def stationary_analysis(policy: ThresholdPolicy, model: TruncatedModel) -> StationaryResult:
    """Closed-form stationary distribution of the truncated birth-death
    chain under the state-dependent rates the policy implies."""
    rates = np.array(model.service_rates)
    mu = rates[policy.actions(model.q_max)]  # serving rate by state; entry 0 unused
    ratios = model.arrival_rate / mu[1:]
    weights = np.concatenate([[1.0], np.cumprod(ratios)])
    dist = weights / weights.sum()
    qs = np.arange(model.num_states)
    expected_q = float((qs * dist).sum())
    cost = float(
        (dist * (model.holding_cost * qs + model.energy_cost * mu * (qs >= 1))).sum()
    )
    return StationaryResult(expected_q=expected_q, cost_per_time=cost, distribution=dist)


def best_threshold_policy(
    model: TruncatedModel, max_threshold: int = 20
) -> tuple[ThresholdPolicy, float]:
    """Brute-force oracle: enumerate every monotone threshold policy with
    switching points in [1, max_threshold] and return the cheapest."""
    num_actions = len(model.service_rates)
    best_policy = None
    best_cost = math.inf
    for combo in combinations_with_replacement(range(1, max_threshold + 1), num_actions - 1):
        policy = ThresholdPolicy(combo)
        cost = stationary_analysis(policy, model).cost_per_time
        if cost < best_cost:
            best_cost = cost
            best_policy = policy
    assert best_policy is not None
    return best_policy, best_cost


@dataclass(frozen=True)
class SimVerification:
    cost_per_time: float
    expected_q: float
    cost_ci: float  # 95% half-width from batch means
    q_ci: float
    epochs: int
    horizon: float


def verify_by_simulation(
    policy: ThresholdPolicy,
    params: EnvParams,
    horizon: float,
    rng: np.random.Generator,
    num_batches: int = 20,
) -> SimVerification:
    """Run the threshold policy through the event-driven simulator.

    Decision epochs consult the policy with the current queue length; the
    run is split into equal time batches (intervals assigned by their
    start) and batch means give approximate 95% confidence half-widths.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    batch_len = horizon / num_batches
    held = np.zeros(num_batches)
    energy = np.zeros(num_batches)
    times = np.zeros(num_batches)
    state = QueueState(queue_len=1, prev_queue_len=1, sim_time=0.0, epoch=0)
    epochs = 0
    while state.sim_time < horizon:
        b = min(int(state.sim_time / batch_len), num_batches - 1)
        action = policy.action_for(state.queue_len)
        state, rec = step(state, action, params, rng)
        epochs += 1
        held[b] += rec.time_avg_queue * rec.dt
        energy[b] += params.energy_cost * params.service_rates[rec.action] * rec.busy_time
        times[b] += rec.dt
    cost_batches = (params.holding_cost * held + energy) / times
    q_batches = held / times
    total_time = float(times.sum())
    cost_rate = float((params.holding_cost * held.sum() + energy.sum()) / total_time)
    expected_q = float(held.sum() / total_time)
    z = 1.96  # normal approximation over the batch means
    cost_ci = z * float(cost_batches.std(ddof=1)) / math.sqrt(num_batches)
    q_ci = z * float(q_batches.std(ddof=1)) / math.sqrt(num_batches)
    return SimVerification(
        cost_per_time=cost_rate,
        expected_q=expected_q,
        cost_ci=cost_ci,
        q_ci=q_ci,
        epochs=epochs,
        horizon=horizon,
    )


def mm1_expected_q(arrival_rate: float, service_rate: float) -> float:
    """Closed-form mean number in system for a fixed-rate M/M/1 queue."""
    return arrival_rate / (service_rate - arrival_rate)


def mm1_cost_rate(params: EnvParams, service_rate: float) -> float:
    """Closed-form long-run cost per unit time at a fixed service rate."""
    return (
        params.holding_cost * mm1_expected_q(params.arrival_rate, service_rate)
        + params.energy_cost * params.arrival_rate
    )
