"""Event-driven simulation of a service-rate-controlled M/M/1 queue.

The controller picks a service rate immediately before each service start
(a decision epoch) and holds it for that one service. Between epochs the
system evolves as an ordinary M/M/1 queue at the chosen rate. The reward
for an interval is the exact piecewise-constant integral of holding plus
energy cost over the interval; nothing is time-discretized.

Conventions:

* Queue length counts every job in the system, including the one in
  service, so it is at least 1 at every decision epoch.
* If a service completion empties the system, the server idles (no holding
  cost, no energy cost) until the next arrival, which enters service
  immediately; that arrival instant is the next decision epoch.
* Randomness comes from a caller-owned ``numpy.random.Generator`` (PCG64
  via :func:`make_rng`). Poisson arrivals are memoryless, so the time to
  the next arrival measured from any decision epoch is
  Exponential(arrival_rate) regardless of history; each interval is
  therefore simulated from fresh draws. Identical seed and call sequence
  reproduce bit-identical trajectories.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Queue lengths are divided by this before entering the networks. Single
# digits map to the tanh units' curved region, which the critic needs to
# fit the convex differential-value curve; larger scales leave it nearly
# linear and rarely-visited states mispriced.
DEFAULT_OBS_SCALE = 3.0


class Representation(Enum):
    """Observation layout fed to the policy/critic networks."""

    Q_ONLY = "q"
    Q_WITH_HISTORY = "qq"

    @property
    def dim(self) -> int:
        return 1 if self is Representation.Q_ONLY else 2


@dataclass(frozen=True)
class EnvParams:
    """Static description of the controlled queue and episode settings.

    ``service_rates`` must be sorted ascending and the arrival rate must be
    below the slowest rate so the queue is stable under every action.
    """

    arrival_rate: float = 0.0400
    service_rates: tuple[float, ...] = (0.0417, 0.0500, 0.0625, 0.0833, 0.1000)
    holding_cost: float = 0.4
    energy_cost: float = 0.25
    epochs_per_episode: int = 512
    warm_start_n: int = 100
    obs_scale: float = DEFAULT_OBS_SCALE

    def __post_init__(self):
        if not self.service_rates:
            raise ValueError("service_rates must be non-empty")
        if any(mu <= 0 for mu in self.service_rates):
            raise ValueError("service rates must be strictly positive")
        if list(self.service_rates) != sorted(self.service_rates):
            raise ValueError("service_rates must be sorted ascending")
        if not 0 < self.arrival_rate < self.service_rates[0]:
            raise ValueError(
                "arrival_rate must satisfy 0 < arrival_rate < min(service_rates) "
                "so the queue is stable under every action"
            )
        if self.holding_cost <= 0:
            raise ValueError("holding_cost must be positive")
        if self.energy_cost < 0:
            raise ValueError("energy_cost must be nonnegative")
        if self.epochs_per_episode < 1:
            raise ValueError("epochs_per_episode must be a positive integer")
        if self.warm_start_n < 1:
            raise ValueError("warm_start_n must be a positive integer")
        if self.obs_scale <= 0:
            raise ValueError("obs_scale must be positive")

    @property
    def num_actions(self) -> int:
        return len(self.service_rates)


@dataclass(frozen=True)
class QueueState:
    """Snapshot taken at a decision epoch, just before a service starts."""

    queue_len: int
    prev_queue_len: int
    sim_time: float
    epoch: int


@dataclass(frozen=True)
class StepRecord:
    """Exact accounting for one inter-decision interval.

    ``reward`` equals ``-(holding_cost * time_avg_queue * dt
    + energy_cost * rate * busy_time)`` up to floating-point rounding.
    """

    action: int
    reward: float
    dt: float
    time_avg_queue: float
    busy_time: float


@dataclass
class WarmStartBuffer:
    """FIFO ring of terminal queue lengths used to initialize episodes."""

    capacity: int
    entries: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be a positive integer")
        self.entries = deque(self.entries, maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.entries)


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic PCG64 stream for one trial.

    The generator algorithm is pinned (NumPy ``default_rng``
    = PCG64): identical seeds and call sequences give bit-identical
    variates.
    """
    return np.random.default_rng(seed)


def reset(params: EnvParams, buffer: WarmStartBuffer, rng: np.random.Generator) -> QueueState:
    """Start an episode, warm-starting the queue length from ``buffer``.

    The initial length is drawn uniformly from the buffered terminal
    states; an empty buffer (first episode) starts at 1, i.e. an empty
    system plus the first arriving job about to enter service.
    """
    if len(buffer) == 0:
        q0 = 1
    else:
        q0 = int(buffer.entries[rng.integers(len(buffer.entries))])
    return QueueState(queue_len=q0, prev_queue_len=q0, sim_time=0.0, epoch=0)


def step(
    state: QueueState,
    action: int,
    params: EnvParams,
    rng: np.random.Generator,
) -> tuple[QueueState, StepRecord]:
    """Simulate exactly one inter-decision interval.

    Draws the service duration at the chosen rate, superposes Poisson
    arrivals, and integrates the cost piecewise-constantly between events.
    If the completion empties the system, the interval extends through the
    idle period to the next arrival (which enters service immediately).
    """
    if state.queue_len < 1:
        raise ValueError("decision epochs require at least one job in the system")
    if not 0 <= action < params.num_actions:
        raise ValueError(f"action {action} out of range [0, {params.num_actions})")

    rate = params.service_rates[action]
    service = rng.exponential(1.0 / rate)

    q = state.queue_len
    held = 0.0  # integral of Q(t) over the service period
    t = 0.0
    arrival = rng.exponential(1.0 / params.arrival_rate)
    while arrival < service:
        held += q * (arrival - t)
        t = arrival
        q += 1
        arrival += rng.exponential(1.0 / params.arrival_rate)
    held += q * (service - t)
    q -= 1  # service completion

    if q >= 1:
        dt = service
        q_next = q
    else:
        # Idle until the pending arrival; zero holding and energy cost.
        dt = arrival
        q_next = 1

    reward = -(params.holding_cost * held + params.energy_cost * rate * service)
    record = StepRecord(
        action=action,
        reward=reward,
        dt=dt,
        time_avg_queue=held / dt,
        busy_time=service,
    )
    next_state = QueueState(
        queue_len=q_next,
        prev_queue_len=state.queue_len,
        sim_time=state.sim_time + dt,
        epoch=state.epoch + 1,
    )
    return next_state, record


def observe(
    state: QueueState,
    representation: Representation,
    scale: float = DEFAULT_OBS_SCALE,
) -> np.ndarray:
    """Feature vector for the networks: queue length, optionally with the
    previous epoch's length, both divided by the same scale constant."""
    if representation is Representation.Q_ONLY:
        return np.array([state.queue_len / scale])
    return np.array([state.queue_len / scale, state.prev_queue_len / scale])


def record_terminal(buffer: WarmStartBuffer, state: QueueState) -> WarmStartBuffer:
    """Push a completed episode's final queue length; oldest entry is
    evicted once the buffer is full."""
    buffer.entries.append(state.queue_len)
    return buffer
