"""Experiment orchestration: config, seeding, trials, CSVs, and reports.

A trial is fully determined by (config hash, algorithm, representation,
seed): the seed feeds a SeedSequence that spawns separate PCG64 streams
for the environment, the agent, network initialization, and final
evaluation, so re-running a trial reproduces every non-timing output byte
(no timing columns are written at all).

CSV schemas are fixed here and are the only interface the plotting
component consumes. Learning-curve rows are one-per-update, thinned to
every 10th update beyond 10,000 updates; target crossings are detected on
the unthinned stream and their rows are always written, so recomputing the
crossing metrics from the persisted CSV gives the in-run values exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .agents import (
    AgentConfig,
    CenteringMode,
    Transition,
    a2c_update,
    make_rho,
    ppo_update,
    reinforce_update,
    select_action,
    updates_per_ppo_batch,
)
from .dp import (
    TruncatedModel,
    extract_thresholds,
    relative_value_iteration,
    stationary_analysis,
)
from .env import (
    EnvParams,
    Representation,
    WarmStartBuffer,
    observe,
    record_terminal,
    reset,
    step,
)
from .metrics import EtaTarget, PolicyQuality, policy_quality, pseudo_regret
from .nets import TrainingDiverged, init_mlp, save_checkpoint

ALGORITHMS = ("reinforce", "a2c", "ppo")
DEFAULT_SEEDS = (41, 72, 99, 81, 52)
DEFAULT_OUT_DIR = "runs"
OUT_DIR_ENV_VAR = "QUEUECTL_OUT"

LEARNING_CURVE_HEADER = [
    "config_hash", "algo", "state", "seed",
    "update_count", "sample_count", "sim_time", "ma_reward", "rho_hat",
]
REGRET_HEADER = [
    "config_hash", "algo", "state", "seed", "epoch", "mean_q", "baseline_q", "cum_regret",
]
EVAL_HEADER = [
    "config_hash", "algo", "state", "seed",
    "episodes", "q_pi_per_epoch", "q_pi_per_time", "std",
]
SUMMARY_HEADER = [
    "config_hash", "algo", "state",
    "u_eta_mean", "u_eta_std", "n_eta_mean", "n_eta_std",
    "q_pi_mean", "q_pi_std", "regret_mean", "regret_std", "seed_count",
]
FIG1_HEADER = ["algorithm", "representation", "sample_count", "mean_reward", "std_reward"]
FIG2_HEADER = ["algorithm", "representation", "epoch", "mean_regret_delta", "std"]
DP_BASELINE_HEADER = [
    "gain_per_time", "gain_per_epoch", "thresholds", "q_max", "tol", "iterations",
]


def default_agent_configs() -> dict[str, AgentConfig]:
    """Per-algorithm hyperparameter defaults (ours, not taken from any
    published source; reported verbatim in every output artifact).

    Calibrated on the default queue parameters: the warmup lets the
    average-reward estimate and critic settle before the policy moves
    (otherwise transient errors push rarely revisited states toward bad
    near-deterministic corners), and the episodic learner additionally
    carries a small entropy bonus because its clipped full-episode steps
    can random-walk into absorbing vertices early on.
    """
    return {
        "reinforce": AgentConfig(
            actor_lr=3e-3, critic_lr=0.0, rho_lr=5e-2,
            entropy_coef=1e-2, warmup_epochs=10_240,
        ),
        "a2c": AgentConfig(
            actor_lr=1e-3, critic_lr=1e-2, rho_lr=5e-2, warmup_epochs=50_000,
        ),
        "ppo": AgentConfig(
            actor_lr=1e-3, critic_lr=1e-3, rho_lr=5e-2, warmup_epochs=10_240,
        ),
    }


@dataclass
class ExperimentConfig:
    env: EnvParams = field(default_factory=EnvParams)
    agents: dict[str, AgentConfig] = field(default_factory=default_agent_configs)
    representations: tuple[str, ...] = ("q", "qq")
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    total_epochs: int = 25_000_000
    eval_episodes: int = 20
    eta_fraction: float = 0.95
    ma_window: int = 100
    q_max: int = 500
    rvi_tol: float = 1e-9
    # Optional early stop: halt a trial once the moving average reaches the
    # eta-target for this fraction (0 disables; crossings for eta_fraction
    # are still logged exactly).
    stop_at_eta: float = 0.0
    curve_thin_after: int = 10_000
    curve_thin_factor: int = 10


def _jsonable(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return _jsonable(asdict(cfg))


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _agent_from_dict(data: dict) -> AgentConfig:
    data = dict(data)
    if "centering" in data:
        data["centering"] = CenteringMode(data["centering"])
    clip = data.get("grad_clip_norm")
    if clip is not None and clip <= 0:
        data["grad_clip_norm"] = None
    return AgentConfig(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    env = EnvParams(**{**data["env"], "service_rates": tuple(data["env"]["service_rates"])})
    agents = {name: _agent_from_dict(a) for name, a in data["agents"].items()}
    return ExperimentConfig(
        env=env,
        agents=agents,
        representations=tuple(data["representations"]),
        seeds=tuple(int(s) for s in data["seeds"]),
        total_epochs=int(data["total_epochs"]),
        eval_episodes=int(data["eval_episodes"]),
        eta_fraction=float(data["eta_fraction"]),
        ma_window=int(data["ma_window"]),
        q_max=int(data["q_max"]),
        rvi_tol=float(data["rvi_tol"]),
        stop_at_eta=float(data["stop_at_eta"]),
        curve_thin_after=int(data["curve_thin_after"]),
        curve_thin_factor=int(data["curve_thin_factor"]),
    )


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if key not in out:
            raise KeyError(f"unknown config key: {key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_override(text: str) -> tuple[list[str], object]:
    key, sep, raw = text.partition("=")
    if not sep:
        raise ValueError(f"override {text!r} must look like section.key=value")
    import ast

    try:
        value = ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        value = raw
    return key.split("."), value


def load_config(path: str | Path | None = None, overrides: tuple[str, ...] = ()) -> ExperimentConfig:
    """Defaults, optionally merged with a TOML file, then dotted-key
    command-line overrides (CLI beats file beats defaults)."""
    data = config_to_dict(ExperimentConfig())
    if path is not None:
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as f:
            data = _deep_merge(data, tomllib.load(f))
    for text in overrides:
        keys, value = _parse_override(text)
        node = data
        for k in keys[:-1]:
            node = node[k]
        if keys[-1] not in node:
            raise KeyError(f"unknown config key: {'.'.join(keys)!r}")
        node[keys[-1]] = value
    return config_from_dict(data)


def resolve_out_dir(cli_value: str | None) -> Path:
    """CLI flag beats the QUEUECTL_OUT environment variable beats ./runs."""
    if cli_value is not None:
        return Path(cli_value)
    return Path(os.environ.get(OUT_DIR_ENV_VAR, DEFAULT_OUT_DIR))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvSink:
    """Append-only CSV writer with a fixed header."""

    def __init__(self, path: Path, header: list[str]):
        self.path = path
        self._f = open(path, "w", newline="")
        self._w = csv.writer(self._f)
        self._w.writerow(header)

    def row(self, values) -> None:
        self._w.writerow([_fmt(v) for v in values])

    def close(self) -> None:
        self._f.close()


# ---------------------------------------------------------------------------
# DP reference shared by all trials of a config


@dataclass(frozen=True)
class DpRef:
    reward_per_time: float
    reward_per_epoch: float
    expected_q: float
    thresholds: tuple[int, ...]
    iterations: int


def solve_baseline(cfg: ExperimentConfig) -> DpRef:
    model = TruncatedModel.from_env(cfg.env, cfg.q_max)
    solution = relative_value_iteration(model, cfg.rvi_tol)
    policy = extract_thresholds(solution, model)
    stationary = stationary_analysis(policy, model)
    return DpRef(
        reward_per_time=solution.reward_per_time,
        reward_per_epoch=solution.reward_per_epoch,
        expected_q=stationary.expected_q,
        thresholds=policy.thresholds,
        iterations=solution.iterations,
    )


# ---------------------------------------------------------------------------
# Single trial


@dataclass
class RunArtifacts:
    trial_dir: Path
    algo: str
    representation: str
    seed: int
    u_eta: int | None
    n_eta: int | None
    q_pi_per_epoch: float
    q_pi_per_time: float
    q_pi_std: float
    regret_at_n_eta: float
    epochs_run: int
    updates_run: int
    diverged_at: int | None
    learning_curve: Path
    regret: Path
    eval: Path
    checkpoints: dict[str, Path]


def trial_dir_name(algo: str, representation: str, seed: int) -> str:
    return f"{algo}_{representation}_seed{seed}"


def run_trial(
    cfg: ExperimentConfig,
    algo: str,
    representation: str | Representation,
    seed: int,
    out_dir: str | Path,
    dp_ref: DpRef | None = None,
) -> RunArtifacts:
    """Train one agent to the epoch budget and persist its artifacts."""
    if algo not in cfg.agents:
        raise ValueError(f"no agent config for {algo!r}")
    rep = Representation(representation) if isinstance(representation, str) else representation
    if dp_ref is None:
        dp_ref = solve_baseline(cfg)
    acfg = cfg.agents[algo]
    env = cfg.env
    chash = config_hash(cfg)

    trial_dir = Path(out_dir) / trial_dir_name(algo, rep.value, seed)
    trial_dir.mkdir(parents=True, exist_ok=True)

    streams = np.random.SeedSequence(seed).spawn(4)
    env_rng, agent_rng, init_rng, eval_rng = (np.random.default_rng(s) for s in streams)

    dims = (rep.dim, acfg.hidden_width, acfg.hidden_width, env.num_actions)
    policy = init_mlp(dims, init_rng)
    critic = (
        init_mlp((rep.dim, acfg.hidden_width, acfg.hidden_width, 1), init_rng)
        if algo in ("a2c", "ppo")
        else None
    )
    rho = make_rho(acfg)

    target = EtaTarget(cfg.eta_fraction, dp_ref.reward_per_epoch)
    stop_threshold = (
        EtaTarget(cfg.stop_at_eta, dp_ref.reward_per_epoch).threshold
        if cfg.stop_at_eta > 0
        else None
    )

    buffer = WarmStartBuffer(env.warm_start_n)
    ma_buf: deque[float] = deque(maxlen=cfg.ma_window)
    ma = float("nan")
    update_count = 0
    epoch_count = 0
    sim_time_total = 0.0
    u_eta: int | None = None
    n_eta: int | None = None
    diverged_at: int | None = None
    cum_regret = 0.0
    episode_mean_qs: list[float] = []
    episode_lens: list[int] = []

    curve_sink = CsvSink(trial_dir / "learning_curve.csv", LEARNING_CURVE_HEADER)
    regret_sink = CsvSink(trial_dir / "regret.csv", REGRET_HEADER)

    def log_update() -> None:
        nonlocal u_eta, n_eta
        crossed = u_eta is None and not math.isnan(ma) and ma >= target.threshold
        if crossed:
            u_eta, n_eta = update_count, epoch_count
        if (
            update_count <= cfg.curve_thin_after
            or update_count % cfg.curve_thin_factor == 0
            or crossed
        ):
            curve_sink.row(
                [chash, algo, rep.value, seed, update_count, epoch_count,
                 sim_time_total, ma, rho.rho_hat]
            )

    episode: list[Transition] = []
    ppo_batch: list[Transition] = []
    ep_reward = 0.0
    ep_held = 0.0
    ep_time = 0.0
    ep_epochs = 0

    warm_acfg = dataclasses.replace(acfg, actor_lr=0.0) if acfg.warmup_epochs > 0 else acfg

    state = reset(env, buffer, env_rng)
    obs = observe(state, rep, env.obs_scale)
    stop = False
    try:
        while epoch_count < cfg.total_epochs and not stop:
            action, logp = select_action(policy, obs, agent_rng)
            next_state, rec = step(state, action, env, env_rng)
            next_obs = observe(next_state, rep, env.obs_scale)
            tr = Transition(obs, action, logp, rec.reward, rec.dt, next_obs, state.epoch)
            epoch_count += 1
            sim_time_total += rec.dt
            ep_reward += rec.reward
            ep_held += rec.time_avg_queue * rec.dt
            ep_time += rec.dt
            ep_epochs += 1

            step_acfg = warm_acfg if epoch_count <= acfg.warmup_epochs else acfg

            if algo == "a2c":
                policy, critic, rho = a2c_update(policy, critic, tr, rho, step_acfg)
                update_count += 1
                log_update()
            elif algo == "reinforce":
                episode.append(tr)
            else:  # ppo
                ppo_batch.append(tr)
                if len(ppo_batch) >= acfg.batch_size:
                    policy, critic, rho = ppo_update(
                        policy, critic, ppo_batch, rho, step_acfg, agent_rng
                    )
                    update_count += updates_per_ppo_batch(acfg, len(ppo_batch))
                    ppo_batch = []
                    log_update()

            state, obs = next_state, next_obs

            if ep_epochs >= env.epochs_per_episode:
                record_terminal(buffer, state)
                ma_buf.append(ep_reward / ep_epochs)
                ma = sum(ma_buf) / len(ma_buf)
                mean_q = ep_held / ep_time
                episode_mean_qs.append(mean_q)
                episode_lens.append(ep_epochs)
                cum_regret += ep_epochs * (mean_q - dp_ref.expected_q)
                regret_sink.row(
                    [chash, algo, rep.value, seed, epoch_count, mean_q,
                     dp_ref.expected_q, cum_regret]
                )
                if algo == "reinforce":
                    rf_acfg = warm_acfg if epoch_count <= acfg.warmup_epochs else acfg
                    policy, rho = reinforce_update(policy, episode, rho, rf_acfg)
                    episode = []
                    update_count += 1
                    log_update()
                if stop_threshold is not None and not math.isnan(ma) and ma >= stop_threshold:
                    stop = True
                state = reset(env, buffer, env_rng)
                obs = observe(state, rep, env.obs_scale)
                ep_reward = ep_held = ep_time = 0.0
                ep_epochs = 0
    except TrainingDiverged:
        diverged_at = update_count + 1
    finally:
        curve_sink.close()
        regret_sink.close()

    quality = policy_quality(policy, env, rep, cfg.eval_episodes, eval_rng)
    eval_sink = CsvSink(trial_dir / "eval.csv", EVAL_HEADER)
    eval_sink.row(
        [chash, algo, rep.value, seed, quality.episodes,
         quality.per_epoch, quality.per_time, quality.std]
    )
    eval_sink.close()

    checkpoints = {"policy": trial_dir / "policy.ckpt"}
    save_checkpoint(checkpoints["policy"], policy, rep.value, seed, env.obs_scale, "policy")
    if critic is not None:
        checkpoints["critic"] = trial_dir / "critic.ckpt"
        save_checkpoint(checkpoints["critic"], critic, rep.value, seed, env.obs_scale, "critic")

    if n_eta is not None:
        regret_at = pseudo_regret(
            np.array(episode_mean_qs), np.array(episode_lens), dp_ref.expected_q, horizon=n_eta
        ).total
    else:
        regret_at = float("nan")

    return RunArtifacts(
        trial_dir=trial_dir,
        algo=algo,
        representation=rep.value,
        seed=seed,
        u_eta=u_eta,
        n_eta=n_eta,
        q_pi_per_epoch=quality.per_epoch,
        q_pi_per_time=quality.per_time,
        q_pi_std=quality.std,
        regret_at_n_eta=regret_at,
        epochs_run=epoch_count,
        updates_run=update_count,
        diverged_at=diverged_at,
        learning_curve=trial_dir / "learning_curve.csv",
        regret=trial_dir / "regret.csv",
        eval=trial_dir / "eval.csv",
        checkpoints=checkpoints,
    )


# ---------------------------------------------------------------------------
# Grid


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.array(values, dtype=float)
    finite = arr[np.isfinite(arr)]
    if finite.size == 0:
        return float("nan"), float("nan")
    return float(finite.mean()), float(finite.std())


def _run_trial_job(args) -> RunArtifacts:
    cfg, algo, rep, seed, out_dir, dp_ref = args
    return run_trial(cfg, algo, rep, seed, out_dir, dp_ref)


def run_grid(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    workers: int | None = None,
) -> Path:
    """Run every (algorithm x representation x seed) cell and aggregate.

    Trials are independent processes; results are collected in the fixed
    job order so the summary is deterministic regardless of scheduling.
    Diverged trials are recorded and excluded from the aggregates; the
    surviving seed count is reported per cell.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dp_ref = solve_baseline(cfg)
    algos = [a for a in ALGORITHMS if a in cfg.agents]
    jobs = [
        (cfg, algo, rep, seed, out_dir, dp_ref)
        for algo in algos
        for rep in cfg.representations
        for seed in cfg.seeds
    ]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(jobs) == 1:
        results = [_run_trial_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_job, jobs))

    chash = config_hash(cfg)
    summary_path = out_dir / "summary.csv"
    sink = CsvSink(summary_path, SUMMARY_HEADER)
    for algo in algos:
        for rep in cfg.representations:
            cell = [r for r in results if r.algo == algo and r.representation == rep]
            alive = [r for r in cell if r.diverged_at is None]
            u_mean, u_std = _mean_std(
                [float(r.u_eta) if r.u_eta is not None else float("nan") for r in alive]
            )
            n_mean, n_std = _mean_std(
                [float(r.n_eta) if r.n_eta is not None else float("nan") for r in alive]
            )
            q_mean, q_std = _mean_std([r.q_pi_per_epoch for r in alive])
            r_mean, r_std = _mean_std([r.regret_at_n_eta for r in alive])
            sink.row(
                [chash, algo, rep, u_mean, u_std, n_mean, n_std,
                 q_mean, q_std, r_mean, r_std, len(alive)]
            )
    sink.close()
    return summary_path


# ---------------------------------------------------------------------------
# Report


class ReportError(RuntimeError):
    pass


def _read_csv(path: Path, expected_header: list[str]) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ReportError(f"{path} is empty") from None
        for col in expected_header:
            if col not in header:
                raise ReportError(f"{path} is missing column {col!r}")
        for col in header:
            if col not in expected_header:
                raise ReportError(f"{path} has unexpected column {col!r}")
        return [dict(zip(header, row)) for row in reader]


def _aligned_mean_std(series: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Align per-seed series (x, y) by row index at the common prefix."""
    n = min(x.size for x, _ in series)
    xs = series[0][0][:n]
    stack = np.stack([y[:n] for _, y in series])
    return xs, stack.mean(axis=0), stack.std(axis=0)


def _fmt_cell(value: float) -> str:
    if not math.isfinite(value):
        return "n/a"
    if value == 0:
        return "0"
    if abs(value) >= 1e4:
        return f"{value:.2e}"
    return f"{value:.4g}"


def report(in_dir: str | Path) -> str:
    """Format the aggregate table and write the figure-input CSVs.

    Reads summary.csv plus the per-trial learning-curve and regret CSVs
    under ``in_dir``; emits fig1_input.csv (mean/std learning curves) and
    fig2_input.csv (mean/std per-episode regret deltas) alongside the
    summary. Raises :class:`ReportError` before writing anything if the
    summary is missing, empty, or malformed.
    """
    in_dir = Path(in_dir)
    summary_path = in_dir / "summary.csv"
    if not summary_path.exists():
        raise ReportError(f"no summary.csv in {in_dir}")
    rows = _read_csv(summary_path, SUMMARY_HEADER)
    if not rows:
        raise ReportError(f"{summary_path} has no data rows")

    cells = {(r["algo"], r["state"]): r for r in rows}
    algos = sorted({r["algo"] for r in rows}, key=lambda a: ALGORITHMS.index(a))
    reps = sorted({r["state"] for r in rows}, key=lambda s: ("q", "qq").index(s) if s in ("q", "qq") else 2)

    metric_cols = [
        ("updates to target", "u_eta_mean", "u_eta_std"),
        ("samples to target", "n_eta_mean", "n_eta_std"),
        ("final reward", "q_pi_mean", "q_pi_std"),
        ("regret at target", "regret_mean", "regret_std"),
    ]
    lines = []
    header = f"{'algorithm':<12}{'metric':<20}"
    for rep in reps:
        header += f"{rep:>22}"
    if len(reps) == 2:
        header += f"{'delta%':>10}"
    lines.append(header)
    lines.append("-" * len(header))
    for algo in algos:
        for label, mean_col, std_col in metric_cols:
            line = f"{algo:<12}{label:<20}"
            means = []
            for rep in reps:
                cell = cells.get((algo, rep))
                if cell is None:
                    line += f"{'n/a':>22}"
                    means.append(float("nan"))
                    continue
                mean = float(cell[mean_col])
                std = float(cell[std_col])
                means.append(mean)
                line += f"{_fmt_cell(mean) + ' ± ' + _fmt_cell(std):>22}"
            if len(reps) == 2:
                base, aug = means
                if math.isfinite(base) and math.isfinite(aug) and base != 0:
                    line += f"{100.0 * (aug - base) / abs(base):>+9.1f}%"
                else:
                    line += f"{'n/a':>10}"
            lines.append(line)
    table = "\n".join(lines)

    # Figure inputs: group per-trial CSVs by (algo, representation).
    curve_groups: dict[tuple[str, str], list[tuple[np.ndarray, np.ndarray]]] = {}
    regret_groups: dict[tuple[str, str], list[tuple[np.ndarray, np.ndarray]]] = {}
    for trial_dir in sorted(p for p in in_dir.iterdir() if p.is_dir()):
        curve_path = trial_dir / "learning_curve.csv"
        regret_path = trial_dir / "regret.csv"
        if not curve_path.exists() or not regret_path.exists():
            continue
        curve_rows = _read_csv(curve_path, LEARNING_CURVE_HEADER)
        if curve_rows:
            key = (curve_rows[0]["algo"], curve_rows[0]["state"])
            x = np.array([int(r["sample_count"]) for r in curve_rows])
            y = np.array([float(r["ma_reward"]) for r in curve_rows])
            keep = np.isfinite(y)
            curve_groups.setdefault(key, []).append((x[keep], y[keep]))
        regret_rows = _read_csv(regret_path, REGRET_HEADER)
        if regret_rows:
            key = (regret_rows[0]["algo"], regret_rows[0]["state"])
            x = np.array([int(r["epoch"]) for r in regret_rows])
            delta = np.array(
                [float(r["mean_q"]) - float(r["baseline_q"]) for r in regret_rows]
            )
            regret_groups.setdefault(key, []).append((x, delta))

    fig1 = CsvSink(in_dir / "fig1_input.csv", FIG1_HEADER)
    for (algo, rep), series in sorted(curve_groups.items()):
        xs, mean, std = _aligned_mean_std(series)
        for x, m, s in zip(xs, mean, std):
            fig1.row([algo, rep, int(x), float(m), float(s)])
    fig1.close()

    fig2 = CsvSink(in_dir / "fig2_input.csv", FIG2_HEADER)
    for (algo, rep), series in sorted(regret_groups.items()):
        xs, mean, std = _aligned_mean_std(series)
        for x, m, s in zip(xs, mean, std):
            fig2.row([algo, rep, int(x), float(m), float(s)])
    fig2.close()

    return table


# ---------------------------------------------------------------------------
# DP baseline report (CLI helper)


def dp_baseline_report(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> str:
    """Plain-text baseline summary plus a one-row CSV artifact."""
    model = TruncatedModel.from_env(cfg.env, cfg.q_max)
    solution = relative_value_iteration(model, cfg.rvi_tol)
    policy = extract_thresholds(solution, model)
    stationary = stationary_analysis(policy, model)
    lines = [
        "optimal threshold policy (exact average-cost DP)",
        f"  states 0..{cfg.q_max}, uniformization rate {model.uniformization_rate!r}, "
        f"tol {cfg.rvi_tol!r}, {solution.iterations} iterations",
        f"  thresholds (first queue length using each faster rate): "
        + ", ".join(str(t) for t in policy.thresholds),
        f"  gain: cost {solution.gain!r} per unit time "
        f"({solution.gain_per_epoch!r} per decision epoch)",
        f"  reward: {solution.reward_per_time!r} per unit time "
        f"({solution.reward_per_epoch!r} per decision epoch)",
        f"  stationary mean queue length: {stationary.expected_q!r}",
    ]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        sink = CsvSink(out_dir / "dp_baseline.csv", DP_BASELINE_HEADER)
        sink.row(
            [solution.gain, solution.gain_per_epoch,
             ";".join(str(t) for t in policy.thresholds),
             cfg.q_max, cfg.rvi_tol, solution.iterations]
        )
        sink.close()
    return "\n".join(lines)


def evaluate_checkpoint(
    checkpoint: str | Path,
    episodes: int,
    cfg: ExperimentConfig,
) -> PolicyQuality:
    """Reload a policy checkpoint and score it on fresh episodes.

    The evaluation stream is derived from the checkpoint's training seed
    through a distinct SeedSequence branch, so results are reproducible
    but independent of the training draws.
    """
    from .nets import load_checkpoint

    params, header = load_checkpoint(checkpoint)
    rep = Representation(header["representation"])
    env = cfg.env
    if float(header.get("obs_scale", env.obs_scale)) != env.obs_scale:
        env = EnvParams(**{**asdict(env), "obs_scale": float(header["obs_scale"])})
    rng = np.random.default_rng(np.random.SeedSequence(int(header["seed"]), spawn_key=(1,)))
    return policy_quality(params, env, rep, episodes, rng)
