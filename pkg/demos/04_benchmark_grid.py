"""Small benchmark grid: three algorithms, both state representations.

Runs a reduced-budget version of the full experiment grid, aggregates the
four metrics per cell into summary.csv, prints the comparison table, and
writes the figure-input CSVs consumed by the plotting package:

    plots learning-curves runs/demo_grid/fig1_input.csv -o fig1.png
    plots regret          runs/demo_grid/fig2_input.csv -o fig2.png

Budgets here are sized for a quick look, not for converged policies; see
tests/test_acceptance.py for the full benchmark settings.
"""

from queuectl.harness import ExperimentConfig, report, run_grid

cfg = ExperimentConfig(
    seeds=(41, 72),
    total_epochs=120_000,
    eval_episodes=30,
    ma_window=50,
)

summary = run_grid(cfg, "runs/demo_grid", workers=1)
print(f"summary written to {summary}\n")
print(report("runs/demo_grid"))
print("\nfigure inputs: runs/demo_grid/fig1_input.csv, runs/demo_grid/fig2_input.csv")
