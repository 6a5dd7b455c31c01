"""Evaluation metrics computed from training logs and the DP baseline.

Four quantities summarize a trial: the number of gradient updates and the
number of decision epochs needed for the moving-average reward to reach an
eta-target derived from the DP optimum, the mean reward rate of the final
policy over fresh evaluation episodes, and the cumulative excess queue
length relative to the optimal policy's stationary mean. All of them are
pure functions of logged data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import greedy_action, select_action
from .env import EnvParams, Representation, WarmStartBuffer, observe, record_terminal, reset, step
from .nets import MlpParams


@dataclass(frozen=True)
class EtaTarget:
    """Reward floor eta-close to the optimum.

    For an optimum ``rho_star`` (negative reward per epoch) the threshold
    is ``rho_star - (1 - eta_fraction) * |rho_star|``.
    """

    eta_fraction: float
    rho_star_per_epoch: float

    def __post_init__(self):
        if not 0 < self.eta_fraction <= 1:
            raise ValueError("eta_fraction must lie in (0, 1]")

    @property
    def threshold(self) -> float:
        return self.rho_star_per_epoch - (1.0 - self.eta_fraction) * abs(self.rho_star_per_epoch)


@dataclass
class LearningCurve:
    """Per-update log rows; update and sample counts strictly increase."""

    update_count: np.ndarray
    sample_count: np.ndarray
    sim_time: np.ndarray
    ma_reward: np.ndarray
    rho_hat: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.update_count) <= 0) or np.any(np.diff(self.sample_count) < 0):
            raise ValueError("update_count must strictly increase and sample_count never decrease")

    def __len__(self) -> int:
        return self.update_count.size

    @classmethod
    def from_csv(cls, path: str | Path) -> "LearningCurve":
        rows = list(csv.DictReader(open(path, newline="")))
        return cls(
            update_count=np.array([int(r["update_count"]) for r in rows]),
            sample_count=np.array([int(r["sample_count"]) for r in rows]),
            sim_time=np.array([float(r["sim_time"]) for r in rows]),
            ma_reward=np.array([float(r["ma_reward"]) for r in rows]),
            rho_hat=np.array([float(r["rho_hat"]) for r in rows]),
        )


def _first_crossing(curve: LearningCurve, target: EtaTarget) -> int | None:
    if len(curve) == 0:
        raise ValueError("curve must be non-empty")
    with np.errstate(invalid="ignore"):
        hits = np.where(curve.ma_reward >= target.threshold)[0]
    return int(hits[0]) if hits.size else None


def convergence_speed(curve: LearningCurve, target: EtaTarget) -> int | None:
    """Update count at the first moving-average crossing of the target,
    or None if the curve never reaches it."""
    idx = _first_crossing(curve, target)
    return None if idx is None else int(curve.update_count[idx])


def sampling_efficiency(curve: LearningCurve, target: EtaTarget) -> int | None:
    """Decision-epoch count at the first crossing, or None."""
    idx = _first_crossing(curve, target)
    return None if idx is None else int(curve.sample_count[idx])


@dataclass(frozen=True)
class PolicyQuality:
    per_epoch: float  # mean over episodes of (reward sum / epoch count)
    per_time: float  # mean over episodes of (reward sum / elapsed time)
    std: float  # std of the per-epoch episode means (population)
    episodes: int


def policy_quality(
    policy: MlpParams,
    params: EnvParams,
    representation: Representation,
    episodes: int,
    rng: np.random.Generator,
    greedy: bool = False,
) -> PolicyQuality:
    """Evaluate a frozen policy over fresh warm-started episodes.

    Actions are sampled from the stochastic policy unless ``greedy`` is
    set (argmax, ties to the lowest index).
    """
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    buffer = WarmStartBuffer(params.warm_start_n)
    per_epoch = np.empty(episodes)
    per_time = np.empty(episodes)
    for e in range(episodes):
        state = reset(params, buffer, rng)
        total = 0.0
        elapsed = 0.0
        for _ in range(params.epochs_per_episode):
            obs = observe(state, representation, params.obs_scale)
            if greedy:
                action = greedy_action(policy, obs)
            else:
                action, _ = select_action(policy, obs, rng)
            state, rec = step(state, action, params, rng)
            total += rec.reward
            elapsed += rec.dt
        record_terminal(buffer, state)
        per_epoch[e] = total / params.epochs_per_episode
        per_time[e] = total / elapsed
    return PolicyQuality(
        per_epoch=float(per_epoch.mean()),
        per_time=float(per_time.mean()),
        std=float(per_epoch.std()),
        episodes=episodes,
    )


@dataclass
class RegretTrace:
    """Cumulative excess queue length over the optimal policy's mean.

    One row per episode: the epoch count at the episode's end, the
    episode's time-weighted mean queue length, and the running regret
    (sum over epochs of the per-epoch excess).
    """

    epoch: np.ndarray
    mean_q: np.ndarray
    baseline_q: float
    cum_regret: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cum_regret[-1]) if self.cum_regret.size else 0.0


def pseudo_regret(
    episode_mean_q: np.ndarray,
    episode_epochs: np.ndarray,
    baseline_q: float,
    horizon: int | None = None,
) -> RegretTrace:
    """Accumulate per-epoch excess queue length, truncated at ``horizon``.

    Every epoch of an episode contributes that episode's time-weighted
    mean queue length; an episode straddling the horizon contributes only
    its epochs up to the horizon.
    """
    episode_mean_q = np.asarray(episode_mean_q, dtype=float)
    episode_epochs = np.asarray(episode_epochs, dtype=int)
    if episode_mean_q.shape != episode_epochs.shape:
        raise ValueError("episode arrays must have matching shapes")
    ends = np.cumsum(episode_epochs)
    counted = episode_epochs.astype(float)
    if horizon is not None:
        starts = ends - episode_epochs
        counted = np.clip(horizon - starts, 0, episode_epochs).astype(float)
        keep = counted > 0
        ends, counted, episode_mean_q = ends[keep], counted[keep], episode_mean_q[keep]
        ends = np.minimum(ends, horizon)
    cum = np.cumsum(counted * (episode_mean_q - baseline_q))
    return RegretTrace(
        epoch=ends.astype(int),
        mean_q=episode_mean_q,
        baseline_q=float(baseline_q),
        cum_regret=cum,
    )
