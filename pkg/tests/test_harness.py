import csv
import json
from pathlib import Path

import numpy as np
import pytest

from queuectl.agents import AgentConfig
from queuectl.cli import main
from queuectl.env import EnvParams, Representation
from queuectl.harness import (
    EVAL_HEADER,
    FIG1_HEADER,
    FIG2_HEADER,
    LEARNING_CURVE_HEADER,
    REGRET_HEADER,
    SUMMARY_HEADER,
    CsvSink,
    ExperimentConfig,
    ReportError,
    config_from_dict,
    config_hash,
    config_to_dict,
    dp_baseline_report,
    evaluate_checkpoint,
    load_config,
    report,
    resolve_out_dir,
    run_grid,
    run_trial,
    solve_baseline,
)
from queuectl.metrics import policy_quality
from queuectl.nets import init_mlp


def tiny_config(**kw) -> ExperimentConfig:
    agents = {
        "reinforce": AgentConfig(actor_lr=1e-2, critic_lr=0.0, rho_lr=5e-2,
                                 hidden_width=16),
        "a2c": AgentConfig(actor_lr=3e-3, critic_lr=1e-2, rho_lr=5e-2, hidden_width=16),
        "ppo": AgentConfig(actor_lr=1e-3, critic_lr=1e-3, rho_lr=5e-2,
                           batch_size=128, minibatch_size=64, hidden_width=16),
    }
    defaults = dict(
        env=EnvParams(epochs_per_episode=64, warm_start_n=20),
        agents=agents,
        seeds=(41, 72),
        total_epochs=1024,
        eval_episodes=3,
        q_max=200,
        ma_window=10,
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestConfig:
    def test_hash_is_stable_and_sensitive(self):
        a, b = tiny_config(), tiny_config()
        assert config_hash(a) == config_hash(b)
        c = tiny_config(total_epochs=2048)
        assert config_hash(a) != config_hash(c)

    def test_round_trip_through_dict(self):
        cfg = tiny_config()
        rebuilt = config_from_dict(config_to_dict(cfg))
        assert config_hash(rebuilt) == config_hash(cfg)

    def test_dict_form_is_json_serializable(self):
        json.dumps(config_to_dict(tiny_config()))

    def test_load_config_defaults(self):
        cfg = load_config()
        assert cfg.env.arrival_rate == 0.04
        assert cfg.env.service_rates == (0.0417, 0.0500, 0.0625, 0.0833, 0.1000)
        assert cfg.env.holding_cost == 0.4
        assert cfg.env.energy_cost == 0.25
        assert cfg.seeds == (41, 72, 99, 81, 52)

    def test_load_config_toml_and_overrides(self, tmp_path):
        toml = tmp_path / "exp.toml"
        toml.write_text(
            "total_epochs = 5000\n[env]\narrival_rate = 0.03\n"
            "[agents.ppo]\nactor_lr = 0.005\n"
        )
        cfg = load_config(toml, overrides=("env.arrival_rate=0.02", "seeds=[1, 2]"))
        assert cfg.total_epochs == 5000
        assert cfg.env.arrival_rate == 0.02  # CLI beats file
        assert cfg.agents["ppo"].actor_lr == 0.005
        assert cfg.seeds == (1, 2)

    def test_unknown_key_rejected(self, tmp_path):
        toml = tmp_path / "exp.toml"
        toml.write_text("not_a_key = 1\n")
        with pytest.raises(KeyError):
            load_config(toml)
        with pytest.raises(KeyError):
            load_config(None, overrides=("env.bogus=1",))

    def test_out_dir_resolution(self, monkeypatch):
        monkeypatch.delenv("QUEUECTL_OUT", raising=False)
        assert resolve_out_dir(None) == Path("runs")
        monkeypatch.setenv("QUEUECTL_OUT", "/tmp/elsewhere")
        assert resolve_out_dir(None) == Path("/tmp/elsewhere")
        assert resolve_out_dir("chosen") == Path("chosen")


class TestRunTrial:
    @pytest.mark.parametrize("algo", ["reinforce", "a2c", "ppo"])
    def test_artifacts_and_schemas(self, tmp_path, algo):
        cfg = tiny_config()
        art = run_trial(cfg, algo, "q", 41, tmp_path)
        assert art.epochs_run == cfg.total_epochs
        for path, header in [
            (art.learning_curve, LEARNING_CURVE_HEADER),
            (art.regret, REGRET_HEADER),
            (art.eval, EVAL_HEADER),
        ]:
            with open(path, newline="") as f:
                rows = list(csv.reader(f))
            assert rows[0] == header
            assert len(rows) > 1
            chash = config_hash(cfg)
            for row in rows[1:]:
                assert row[0] == chash
                assert row[1] == algo
                assert row[2] == "q"
                assert row[3] == "41"
        assert art.checkpoints["policy"].exists()
        if algo in ("a2c", "ppo"):
            assert art.checkpoints["critic"].exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = tiny_config()
        a = run_trial(cfg, "ppo", "qq", 72, tmp_path / "one")
        b = run_trial(cfg, "ppo", "qq", 72, tmp_path / "two")
        for name in ("learning_curve.csv", "regret.csv", "eval.csv", "policy.ckpt"):
            assert (a.trial_dir / name).read_bytes() == (b.trial_dir / name).read_bytes()

    def test_zero_learning_rates_leave_policy_at_init(self, tmp_path):
        cfg = tiny_config()
        cfg.agents["a2c"] = AgentConfig(
            actor_lr=0.0, critic_lr=0.0, rho_lr=1e-2, hidden_width=16
        )
        art = run_trial(cfg, "a2c", "q", 41, tmp_path)
        # rebuild the initial policy from the same seed branches and
        # evaluate it with the same evaluation stream
        streams = np.random.SeedSequence(41).spawn(4)
        init_rng = np.random.default_rng(streams[2])
        policy0 = init_mlp((1, 16, 16, cfg.env.num_actions), init_rng)
        eval_rng = np.random.default_rng(streams[3])
        q0 = policy_quality(policy0, cfg.env, Representation.Q_ONLY,
                            cfg.eval_episodes, eval_rng)
        assert art.q_pi_per_epoch == q0.per_epoch

    def test_learning_curve_update_counts_increase(self, tmp_path):
        cfg = tiny_config()
        art = run_trial(cfg, "a2c", "q", 41, tmp_path)
        with open(art.learning_curve, newline="") as f:
            rows = list(csv.DictReader(f))
        ups = [int(r["update_count"]) for r in rows]
        assert ups == sorted(ups)
        assert len(set(ups)) == len(ups)

    def test_unknown_algo_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            run_trial(tiny_config(), "dqn", "q", 41, tmp_path)

    def test_crossings_recoverable_from_persisted_curve(self, tmp_path):
        # recomputing the target crossings from the thinned CSV must give
        # the in-run values exactly (crossing rows are force-written)
        from queuectl.metrics import (
            EtaTarget,
            LearningCurve,
            convergence_speed,
            sampling_efficiency,
        )

        cfg = tiny_config(total_epochs=8192, eta_fraction=0.95)
        dp_ref = solve_baseline(cfg)
        art = run_trial(cfg, "a2c", "q", 41, tmp_path, dp_ref)
        curve = LearningCurve.from_csv(art.learning_curve)
        target = EtaTarget(cfg.eta_fraction, dp_ref.reward_per_epoch)
        assert convergence_speed(curve, target) == art.u_eta
        assert sampling_efficiency(curve, target) == art.n_eta

    def test_regret_csv_matches_recomputation(self, tmp_path):
        from queuectl.metrics import pseudo_regret

        cfg = tiny_config(total_epochs=2048)
        dp_ref = solve_baseline(cfg)
        art = run_trial(cfg, "reinforce", "q", 72, tmp_path, dp_ref)
        with open(art.regret, newline="") as f:
            rows = list(csv.DictReader(f))
        mean_q = np.array([float(r["mean_q"]) for r in rows])
        epochs = np.diff([0] + [int(r["epoch"]) for r in rows])
        trace = pseudo_regret(mean_q, epochs, dp_ref.expected_q)
        persisted = np.array([float(r["cum_regret"]) for r in rows])
        assert np.array_equal(trace.cum_regret, persisted)


class TestRunGrid:
    def test_structural_cell_count_and_summary(self, tmp_path):
        cfg = tiny_config(seeds=(41,))
        summary = run_grid(cfg, tmp_path, workers=1)
        with open(summary, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == SUMMARY_HEADER
        assert len(rows) == 1 + 3 * 2  # 3 algorithms x 2 representations
        for row in rows[1:]:
            assert row[-1] == "1"  # seed_count

    def test_identical_seeds_produce_identical_aggregates(self, tmp_path):
        cfg = tiny_config(seeds=(41, 41), representations=("q",))
        cfg.agents = {"reinforce": cfg.agents["reinforce"]}
        summary = run_grid(cfg, tmp_path, workers=1)
        with open(summary, newline="") as f:
            row = list(csv.DictReader(f))[0]
        # identical trials: zero dispersion across seeds
        assert float(row["q_pi_std"]) == 0.0
        assert row["seed_count"] == "2"


class TestReport:
    def run_small_grid(self, tmp_path, **kw):
        cfg = tiny_config(seeds=(41, 72), **kw)
        cfg.agents = {"reinforce": cfg.agents["reinforce"], "ppo": cfg.agents["ppo"]}
        run_grid(cfg, tmp_path, workers=1)
        return cfg

    def test_report_writes_figure_inputs(self, tmp_path):
        self.run_small_grid(tmp_path)
        text = report(tmp_path)
        assert "reinforce" in text and "ppo" in text
        for name, header in (("fig1_input.csv", FIG1_HEADER), ("fig2_input.csv", FIG2_HEADER)):
            with open(tmp_path / name, newline="") as f:
                rows = list(csv.reader(f))
            assert rows[0] == header
            assert len(rows) > 1

    def test_fig_rows_align_on_common_prefix(self, tmp_path):
        self.run_small_grid(tmp_path)
        report(tmp_path)
        with open(tmp_path / "fig2_input.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        groups = {}
        for r in rows:
            groups.setdefault((r["algorithm"], r["representation"]), []).append(r)
        # every regret row of the shorter seed appears once per group
        for rows_in_group in groups.values():
            epochs = [int(r["epoch"]) for r in rows_in_group]
            assert epochs == sorted(epochs)
            assert len(set(epochs)) == len(epochs)

    def test_missing_summary_errors_without_partials(self, tmp_path):
        with pytest.raises(ReportError):
            report(tmp_path)
        assert not (tmp_path / "fig1_input.csv").exists()
        assert not (tmp_path / "fig2_input.csv").exists()

    def test_empty_summary_errors(self, tmp_path):
        sink = CsvSink(tmp_path / "summary.csv", SUMMARY_HEADER)
        sink.close()
        with pytest.raises(ReportError):
            report(tmp_path)

    def test_malformed_summary_names_column(self, tmp_path):
        path = tmp_path / "summary.csv"
        path.write_text("config_hash,algo\nabc,ppo\n")
        with pytest.raises(ReportError, match="missing column 'state'"):
            report(tmp_path)

    def test_delta_percent_zero_for_equal_cells(self, tmp_path):
        sink = CsvSink(tmp_path / "summary.csv", SUMMARY_HEADER)
        for state in ("q", "qq"):
            sink.row(["h", "ppo", state, 10.0, 1.0, 100.0, 5.0, -6.9, 0.1, 3.0, 0.5, 5])
        sink.close()
        text = report(tmp_path)
        assert "+0.0%" in text

    def test_single_seed_std_is_zero(self, tmp_path):
        cfg = tiny_config(seeds=(41,), representations=("q",))
        cfg.agents = {"ppo": cfg.agents["ppo"]}
        run_grid(cfg, tmp_path, workers=1)
        with open(tmp_path / "summary.csv", newline="") as f:
            row = list(csv.DictReader(f))[0]
        assert float(row["q_pi_std"]) == 0.0


class TestDpBaselineReport:
    def test_report_text_and_csv(self, tmp_path):
        cfg = tiny_config()
        text = dp_baseline_report(cfg, tmp_path)
        assert "thresholds" in text
        with open(tmp_path / "dp_baseline.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["gain_per_time", "gain_per_epoch", "thresholds",
                           "q_max", "tol", "iterations"]
        gain = float(rows[1][0])
        assert gain == pytest.approx(0.4 * (0.04 / 0.06) + 0.25 * 0.04, abs=1e-6)


class TestEvaluateCheckpoint:
    def test_reload_and_score(self, tmp_path):
        cfg = tiny_config()
        art = run_trial(cfg, "ppo", "qq", 41, tmp_path)
        quality = evaluate_checkpoint(art.checkpoints["policy"], 3, cfg)
        assert quality.episodes == 3
        assert np.isfinite(quality.per_epoch)


class TestCli:
    def test_dp_baseline_command(self, capsys):
        rc = main(["dp-baseline", "--set", "q_max=200"])
        assert rc == 0
        assert "thresholds" in capsys.readouterr().out

    def test_train_and_report_flow(self, tmp_path, capsys):
        overrides = [
            "--set", "total_epochs=512",
            "--set", "eval_episodes=2",
            "--set", "q_max=200",
            "--set", "env.epochs_per_episode=64",
            "--set", "env.warm_start_n=10",
            "--set", "seeds=[41]",
            "--set", "ma_window=5",
        ]
        rc = main(["train", "--algo", "reinforce", "--state", "q", "--seed", "41",
                   "--out", str(tmp_path)] + overrides)
        assert rc == 0
        assert (tmp_path / "reinforce_q_seed41" / "learning_curve.csv").exists()

    def test_report_error_exit_code(self, tmp_path, capsys):
        rc = main(["report", "--in", str(tmp_path)])
        assert rc == 1
