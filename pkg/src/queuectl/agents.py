"""Average-reward policy-gradient learners: REINFORCE, A2C, and PPO.

All three share the same environment interface, the manual-gradient
network engine, and a running estimate of the long-run average reward used
to center rewards (the differential formulation). Centering is either per
decision epoch (``reward - rho_hat``) or per unit time
(``reward - rho_hat * dt``).

Update granularity differs by algorithm: REINFORCE applies one batched
ascent step per episode, A2C one step per transition, PPO several epochs
of minibatch steps per collected batch. Zero learning rates skip the
corresponding update entirely (useful for fixed-policy diagnostics).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .nets import (
    Direction,
    MlpParams,
    _backward,
    _forward_cached,
    _softmax,
    grad_norm,
    logprob_grad_sum,
    policy_forward,
    policy_forward_batch,
    sgd_apply,
    value_forward,
    value_forward_batch,
    value_grad_sum,
)


class CenteringMode(Enum):
    PER_EPOCH = "per_epoch"
    PER_TIME = "per_time"


@dataclass
class RhoEstimator:
    """Running estimate of the long-run average reward.

    In PER_EPOCH mode ``rho_hat`` is a reward per decision epoch; in
    PER_TIME mode it is a reward per unit of simulated time.
    """

    rho_hat: float = 0.0
    beta: float = 1e-2
    mode: CenteringMode = CenteringMode.PER_EPOCH

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")

    def center_term(self, dt: float) -> float:
        """The amount subtracted from a reward earned over ``dt``."""
        if self.mode is CenteringMode.PER_EPOCH:
            return self.rho_hat
        return self.rho_hat * dt


@dataclass(frozen=True)
class Transition:
    """One SMDP transition as seen by the learners."""

    obs: np.ndarray
    action: int
    logprob: float
    reward: float
    dt: float
    next_obs: np.ndarray
    epoch: int


@dataclass(frozen=True)
class AgentConfig:
    """Learning hyperparameters; episode structure lives in EnvParams."""

    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    rho_lr: float = 1e-2
    batch_size: int = 1024
    clip_eps: float = 0.2
    ppo_epochs: int = 4
    minibatch_size: int = 256
    entropy_coef: float = 0.0
    grad_clip_norm: float | None = 5.0
    hidden_width: int = 64
    centering: CenteringMode = CenteringMode.PER_EPOCH
    # Epochs during which only the critic and the average-reward estimate
    # learn; shields the policy from the transient while both settle.
    warmup_epochs: int = 0

    def __post_init__(self):
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.actor_lr < 0 or self.critic_lr < 0:
            raise ValueError("learning rates must be nonnegative")
        if not 0 < self.rho_lr <= 1:
            raise ValueError("rho_lr must lie in (0, 1]")


def make_rho(cfg: AgentConfig) -> RhoEstimator:
    return RhoEstimator(rho_hat=0.0, beta=cfg.rho_lr, mode=cfg.centering)


def select_action(
    policy: MlpParams, obs: np.ndarray, rng: np.random.Generator
) -> tuple[int, float]:
    """Sample an action from the policy; returns (index, log-probability)."""
    probs = policy_forward(policy, obs)
    u = rng.random()
    action = int(np.searchsorted(np.cumsum(probs), u))
    action = min(action, probs.shape[0] - 1)
    return action, float(np.log(probs[action]))


def greedy_action(policy: MlpParams, obs: np.ndarray) -> int:
    """Most probable action; ties break toward the lowest index."""
    return int(np.argmax(policy_forward(policy, obs)))


def _centered_rewards(episode: list[Transition], rho: RhoEstimator) -> np.ndarray:
    rewards = np.array([tr.reward for tr in episode])
    if rho.mode is CenteringMode.PER_EPOCH:
        return rewards - rho.rho_hat
    dts = np.array([tr.dt for tr in episode])
    return rewards - rho.rho_hat * dts


def _rho_batch_update(rho: RhoEstimator, episode: list[Transition], centered: np.ndarray) -> RhoEstimator:
    """Move rho_hat toward the batch's empirical reward rate."""
    if rho.mode is CenteringMode.PER_EPOCH:
        residual = float(centered.mean())
    else:
        residual = float(centered.sum() / sum(tr.dt for tr in episode))
    return replace(rho, rho_hat=rho.rho_hat + rho.beta * residual)


def reinforce_update(
    policy: MlpParams,
    episode: list[Transition],
    rho: RhoEstimator,
    cfg: AgentConfig,
) -> tuple[MlpParams, RhoEstimator]:
    """One episodic update from differential returns.

    Returns are reverse cumulative sums of centered rewards; the
    per-transition ascent contributions are accumulated into a single
    batch gradient and applied once.
    """
    if not episode:
        raise ValueError("episode must be non-empty")
    centered = _centered_rewards(episode, rho)
    returns = np.cumsum(centered[::-1])[::-1]
    if cfg.actor_lr > 0:
        obs = np.stack([tr.obs for tr in episode])
        actions = np.array([tr.action for tr in episode])
        grad = logprob_grad_sum(policy, obs, actions, returns, cfg.entropy_coef)
        lr = _clipped_lr(cfg.actor_lr, grad_norm(grad), cfg.grad_clip_norm)
        policy = sgd_apply(policy, grad, lr, Direction.ASCENT)
    rho = _rho_batch_update(rho, episode, centered)
    return policy, rho


def td_error(
    critic: MlpParams, tr: Transition, rho: RhoEstimator
) -> float:
    """One-step differential TD error."""
    v_s = value_forward(critic, tr.obs)
    v_next = value_forward(critic, tr.next_obs)
    return (tr.reward - rho.center_term(tr.dt)) + v_next - v_s


def _clipped_lr(lr: float, norm: float, max_norm: float | None) -> float:
    """Fold gradient-norm clipping into the step size (same update, no copy).

    Non-finite norms pass through unclipped so the divergence check in
    ``sgd_apply`` can reject the update.
    """
    if max_norm is None or norm <= max_norm or norm == 0.0 or not np.isfinite(norm):
        return lr
    return lr * (max_norm / norm)


def a2c_update(
    policy: MlpParams,
    critic: MlpParams,
    tr: Transition,
    rho: RhoEstimator,
    cfg: AgentConfig,
) -> tuple[MlpParams, MlpParams, RhoEstimator]:
    """One online actor-critic step driven by the differential TD error.

    The actor ascends ``delta * grad log pi``, the critic takes a
    semi-gradient step toward the bootstrapped target (next-state value
    held constant), and rho_hat moves by ``beta * delta``.

    This runs once per decision epoch, so forward caches are reused and
    clipping is folded into the step size rather than copying gradients.
    """
    v_out, critic_acts = _forward_cached(critic, tr.obs)
    v_next = value_forward(critic, tr.next_obs)
    delta = (tr.reward - rho.center_term(tr.dt)) + v_next - float(v_out[0])
    if cfg.actor_lr > 0:
        logits, acts = _forward_cached(policy, tr.obs)
        probs = _softmax(logits)
        dout = probs * (-delta)
        dout[tr.action] += delta
        if cfg.entropy_coef != 0.0:
            logp = np.log(probs)
            entropy = -(probs * logp).sum()
            dout += cfg.entropy_coef * (-probs * (logp + entropy))
        actor_grad = _backward(policy, acts, dout)
        lr = _clipped_lr(cfg.actor_lr, grad_norm(actor_grad), cfg.grad_clip_norm)
        policy = sgd_apply(policy, actor_grad, lr, Direction.ASCENT)
    if cfg.critic_lr > 0:
        critic_grad = _backward(critic, critic_acts, np.array([delta]))
        lr = _clipped_lr(cfg.critic_lr, grad_norm(critic_grad), cfg.grad_clip_norm)
        critic = sgd_apply(critic, critic_grad, lr, Direction.ASCENT)
    rho = replace(rho, rho_hat=rho.rho_hat + rho.beta * delta)
    return policy, critic, rho


def clipped_surrogate_term(ratio: float, advantage: float, eps: float) -> tuple[float, bool]:
    """One term of the clipped surrogate objective.

    Returns (value, grad_flows): the min of the unclipped and clipped
    contributions, and whether the gradient flows through the likelihood
    ratio (it does exactly when the unclipped term attains the min).
    """
    unclipped = ratio * advantage
    clipped = min(max(ratio, 1.0 - eps), 1.0 + eps) * advantage
    if unclipped <= clipped:
        return unclipped, True
    return clipped, False


def ppo_update(
    policy: MlpParams,
    critic: MlpParams,
    batch: list[Transition],
    rho: RhoEstimator,
    cfg: AgentConfig,
    rng: np.random.Generator,
) -> tuple[MlpParams, MlpParams, RhoEstimator]:
    """Clipped-surrogate update over one on-policy batch.

    Advantages are one-step differential TD errors computed once with the
    pre-update critic; the critic regresses on the corresponding
    bootstrapped targets over the same minibatches. ``rng`` drives the
    minibatch shuffling and must come from the trial's stream so runs stay
    reproducible.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    n = len(batch)
    obs = np.stack([tr.obs for tr in batch])
    next_obs = np.stack([tr.next_obs for tr in batch])
    actions = np.array([tr.action for tr in batch])
    logp_old = np.array([tr.logprob for tr in batch])

    centered = _centered_rewards(batch, rho)
    v_s = value_forward_batch(critic, obs)
    v_next = value_forward_batch(critic, next_obs)
    advantages = centered + v_next - v_s
    v_targets = centered + v_next

    rho = _rho_batch_update(rho, batch, centered)

    for _ in range(cfg.ppo_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = perm[start : start + cfg.minibatch_size]
            m = idx.size
            if cfg.actor_lr > 0:
                probs = policy_forward_batch(policy, obs[idx])
                logp_new = np.log(probs[np.arange(m), actions[idx]])
                ratios = np.exp(logp_new - logp_old[idx])
                adv = advantages[idx]
                clipped = np.clip(ratios, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv
                unclipped = ratios * adv
                coeffs = np.where(unclipped <= clipped, unclipped, 0.0) / m
                grad = logprob_grad_sum(
                    policy, obs[idx], actions[idx], coeffs, cfg.entropy_coef / m
                )
                lr = _clipped_lr(cfg.actor_lr, grad_norm(grad), cfg.grad_clip_norm)
                policy = sgd_apply(policy, grad, lr, Direction.ASCENT)
            if cfg.critic_lr > 0:
                v_pred = value_forward_batch(critic, obs[idx])
                err = (v_pred - v_targets[idx]) / m
                critic_grad = value_grad_sum(critic, obs[idx], err)
                lr = _clipped_lr(cfg.critic_lr, grad_norm(critic_grad), cfg.grad_clip_norm)
                critic = sgd_apply(critic, critic_grad, lr, Direction.DESCENT)
    return policy, critic, rho


def updates_per_ppo_batch(cfg: AgentConfig, batch_len: int) -> int:
    """Number of minibatch gradient steps one ppo_update performs."""
    per_epoch = -(-batch_len // cfg.minibatch_size)
    return cfg.ppo_epochs * per_epoch
