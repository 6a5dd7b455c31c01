"""Train one agent and watch the moving-average reward approach the optimum.

Runs a short PPO trial against the default queue, printing the learning
curve as it grows, then evaluates the final stochastic policy and compares
it with the exact DP optimum. A few minutes of training already lands
within a few percent; the acceptance suite runs the full benchmark.
"""

import csv

from queuectl.harness import ExperimentConfig, run_trial, solve_baseline

cfg = ExperimentConfig(
    total_epochs=300_000,
    eval_episodes=100,
    ma_window=100,
    stop_at_eta=0.99,
)

dp = solve_baseline(cfg)
print(f"DP optimum: reward {dp.reward_per_epoch:.4f} per epoch "
      f"(thresholds {dp.thresholds}, stationary E[Q] {dp.expected_q:.4f})")
target = dp.reward_per_epoch - 0.05 * abs(dp.reward_per_epoch)
print(f"eta=0.95 target: moving average >= {target:.4f}\n")

art = run_trial(cfg, "ppo", "q", 41, "runs/demo")

with open(art.learning_curve, newline="") as f:
    rows = list(csv.DictReader(f))
shown = rows[:: max(1, len(rows) // 12)]
print(f"{'updates':>9} {'samples':>9} {'moving avg':>11} {'rho_hat':>9}")
for row in shown:
    print(f"{row['update_count']:>9} {row['sample_count']:>9} "
          f"{float(row['ma_reward']):>11.4f} {float(row['rho_hat']):>9.4f}")

print(f"\nreached the eta target after {art.u_eta} updates / {art.n_eta} samples")
print(f"final policy: {art.q_pi_per_epoch:.4f} per epoch over {cfg.eval_episodes} "
      f"episodes (optimum {dp.reward_per_epoch:.4f})")
print(f"artifacts in {art.trial_dir}")
