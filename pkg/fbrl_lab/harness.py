"""
Training runs: warmup collection, the forward/backward training loop of one
trial, multi-trial experiments and their CSV artifacts.
"""

import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .backward_model import build_backward_model, model_snapshot, train_backward
from .config import dump_config
from .ddqn_agent import build_agent, epsilon_schedule, learn_step, q_snapshot, select_action
from .environments import reset, step
from .errors import ExperimentError
from .imagination import ImaginationEngine, SnapshotBoard
from .replay_buffer import ReplayBuffer, Transition, stack_transitions
from .run_ledger import FAILED, FINISHED, init_ledger, record_run_finish, record_run_start
from .tensor_core import save_network

logger = logging.getLogger(__name__)

EPISODE_COLUMNS = ["trial", "episode", "return", "env_steps", "epsilon", "td_loss", "backward_loss"]
SUMMARY_COLUMNS = ["episode", "mean_return", "stderr_return", "trials"]
RAW_FILE = "raw.csv"
SUMMARY_FILE = "summary.csv"
CONFIG_FILE = "config.cfg"
FINAL_WINDOW = 50


def substream(seed, name, index=0):
    """Independent generator for one named consumer of randomness within a trial."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8")), index]))


@dataclass
class EpisodeRecord:
    trial: int
    episode: int
    episode_return: float
    env_steps: int
    epsilon: float
    td_loss: float
    backward_loss: Optional[float]


@dataclass
class LearningCurve:
    trial: int
    seed: int
    records: List[EpisodeRecord] = field(default_factory=list)
    env_steps: int = 0
    imagined_transitions: int = 0
    networks: Dict[str, object] = field(default_factory=dict)

    @property
    def returns(self):
        return np.array([r.episode_return for r in self.records])


@dataclass
class ExperimentResult:
    raw: pd.DataFrame
    summary: pd.DataFrame
    curves: List[LearningCurve]
    output_dir: Optional[Path] = None


def collect_warmup(env_spec, count, rng, buffers):
    """Random-policy transitions that fill the buffers before learning starts."""
    state = reset(env_spec)
    t = 0
    for _ in range(count):
        action = int(rng.integers(env_spec.action_count))
        nxt, reward, terminal = step(env_spec, state, action)
        transition = Transition(state, action, reward, nxt, terminal)
        for buffer in buffers:
            buffer.append(transition)
        t += 1
        if terminal or t >= env_spec.horizon:
            state, t = reset(env_spec), 0
        else:
            state = nxt


def pretrain_backward(model, real_buffer, backward_config, rng):
    """warmup_steps backward-model updates on the collected warmup transitions; returns the losses."""
    if len(real_buffer) < backward_config.batch_size:
        return []
    return [train_backward(model, stack_transitions(real_buffer.sample(backward_config.batch_size, rng)))
            for _ in range(backward_config.warmup_steps)]


def _mean_or_nan(values):
    return float(np.mean(values)) if values else float("nan")


def run_trial(config, trial_seed, trial=0):
    """
    Train one agent from scratch and record every episode.

    Warmup transitions fill the buffer but advance neither learn steps nor the
    epsilon schedule. With imagination configured, the backward model first
    takes backward.warmup_steps updates on the warmup data, then each forward
    step trains it on real transitions and lets the imagination streams add
    rollouts.
    """
    config.validate()
    spec = config.environment
    cfg = config.agent
    fbrl = config.imagination is not None

    agent = build_agent(spec.state_dim, spec.action_count, cfg, substream(trial_seed, "init"))
    explore_rng = substream(trial_seed, "exploration")
    replay_rng = substream(trial_seed, "replay")
    buffer = ReplayBuffer(config.replay_capacity)
    buffers = [buffer]

    model = board = engine = real_buffer = backward_rng = None
    if fbrl:
        model = build_backward_model(spec, config.backward, substream(trial_seed, "backward_init"), optimizer=cfg.optimizer)
        real_buffer = ReplayBuffer(config.replay_capacity)
        buffers.append(real_buffer)
        backward_rng = substream(trial_seed, "backward_replay")
        board = SnapshotBoard(q_snapshot(agent), model_snapshot(model))
        stream_rngs = [substream(trial_seed, "imagination", i) for i in range(config.imagination.stream_count)]
        engine = ImaginationEngine(spec, config.imagination, buffer, board, stream_rngs,
                                   deterministic=config.deterministic_mode)

    collect_warmup(spec, cfg.warmup_samples, substream(trial_seed, "warmup"), buffers)
    logger.info("trial %d (seed %d, %s): %d warmup samples collected", trial, trial_seed,
                config.method, cfg.warmup_samples)
    if fbrl and config.backward.warmup_steps:
        losses = pretrain_backward(model, real_buffer, config.backward, backward_rng)
        board.publish(q_snapshot(agent), model_snapshot(model))
        if losses:
            logger.debug("trial %d: backward model pretrained, loss %.4f -> %.4f", trial, losses[0], losses[-1])

    curve = LearningCurve(trial=trial, seed=trial_seed)
    progress_every = max(1, config.total_episodes // 10)

    with engine if engine is not None else nullcontext():
        for episode in range(config.total_episodes):
            state = reset(spec)
            episode_return = 0.0
            td_losses, backward_losses = [], []

            for _ in range(spec.horizon):
                action = select_action(agent, state, explore_rng)
                nxt, reward, terminal = step(spec, state, action)
                transition = Transition(state, action, reward, nxt, terminal)
                for b in buffers:
                    b.append(transition)
                agent.env_steps += 1
                episode_return += reward

                if len(buffer) >= cfg.batch_size:
                    td_losses.append(learn_step(agent, buffer, replay_rng))
                    if board is not None and agent.step_counter % cfg.target_sync_period == 0:
                        board.publish(q_snapshot(agent), model_snapshot(model))

                if fbrl:
                    if len(real_buffer) >= config.backward.batch_size:
                        batch = stack_transitions(real_buffer.sample(config.backward.batch_size, backward_rng))
                        backward_losses.append(train_backward(model, batch))
                    engine.after_forward_step()

                state = nxt
                if terminal:
                    break

            curve.records.append(EpisodeRecord(
                trial=trial,
                episode=episode,
                episode_return=episode_return,
                env_steps=agent.env_steps,
                epsilon=epsilon_schedule(cfg, agent.env_steps),
                td_loss=_mean_or_nan(td_losses),
                backward_loss=_mean_or_nan(backward_losses) if fbrl else None,
            ))
            if (episode + 1) % progress_every == 0:
                recent = curve.returns[-progress_every:]
                logger.info("trial %d: episode %d/%d, mean return %.3f", trial, episode + 1,
                            config.total_episodes, recent.mean())

    curve.env_steps = agent.env_steps
    curve.imagined_transitions = buffer.imagined_counter
    curve.networks["q"] = agent.online
    if model is not None:
        curve.networks["backward"] = model.net
    return curve


def curves_to_frame(curves):
    rows = [
        (r.trial, r.episode, r.episode_return, r.env_steps, r.epsilon, r.td_loss,
         np.nan if r.backward_loss is None else r.backward_loss)
        for curve in curves for r in curve.records
    ]
    return pd.DataFrame(rows, columns=EPISODE_COLUMNS)


def summarize(raw):
    """Per-episode mean return and standard error across trials."""
    grouped = raw.groupby("episode")["return"]
    summary = pd.DataFrame({
        "mean_return": grouped.mean(),
        "stderr_return": grouped.std(ddof=1) / np.sqrt(grouped.count()),
        "trials": grouped.count(),
    }).reset_index()
    summary["stderr_return"] = summary["stderr_return"].fillna(0.0)
    return summary[SUMMARY_COLUMNS]


def _run_one(config, trial):
    return run_trial(config, config.seed + trial, trial)


def run_trials(config):
    """All trials with seeds seed + trial; any failure aborts the experiment."""
    seeds = [config.seed + i for i in range(config.trials)]
    if config.jobs == 1:
        curves = []
        for trial, seed in enumerate(seeds):
            try:
                curves.append(run_trial(config, seed, trial))
            except Exception as e:
                raise ExperimentError(trial, seed, e) from e
        return curves

    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        futures = [pool.submit(_run_one, config, trial) for trial in range(config.trials)]
        curves = []
        for trial, future in enumerate(futures):
            try:
                curves.append(future.result())
            except Exception as e:
                for pending in futures:
                    pending.cancel()
                raise ExperimentError(trial, seeds[trial], e) from e
        return curves


def write_results(output_dir, config, raw, summary, curves=None):
    """raw.csv, summary.csv and config.cfg; FBRLNN1 checkpoints when curves are given."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_options = dict(index=False, na_rep="", lineterminator="\n", encoding="utf-8")
    raw.to_csv(out / RAW_FILE, **csv_options)
    summary.to_csv(out / SUMMARY_FILE, **csv_options)
    (out / CONFIG_FILE).write_text(dump_config(config), encoding="utf-8")
    for curve in curves or []:
        for name, net in curve.networks.items():
            save_network(net, out / "checkpoints" / f"trial{curve.trial}_{name}.fbrlnn")
    return out


def run_experiment(config, ledger_path=None, checkpoint=False):
    """
    Run every trial, write raw and mean +- stderr curves, and record the run.

    Args:
        config: ExperimentConfig
        ledger_path: SQLite run ledger to record into, or None
        checkpoint: also save each trial's final networks

    Returns:
        ExperimentResult
    """
    config.validate()
    out = Path(config.output_path)
    ledger = init_ledger(ledger_path) if ledger_path else None
    run_id = record_run_start(ledger, config, out) if ledger else None

    try:
        curves = run_trials(config)
    except ExperimentError:
        if ledger:
            record_run_finish(ledger, run_id, FAILED)
            ledger.close()
        raise

    raw = curves_to_frame(curves)
    summary = summarize(raw)
    write_results(out, config, raw, summary, curves if checkpoint else None)

    window = min(FINAL_WINDOW, config.total_episodes)
    final_mean = float(summary["mean_return"].tail(window).mean())
    if ledger:
        record_run_finish(ledger, run_id, FINISHED, final_mean)
        ledger.close()
    logger.info("%s on %s n=%d: final %d-episode mean return %.3f over %d trial(s)",
                config.method, config.environment.kind, config.environment.size,
                window, final_mean, config.trials)
    return ExperimentResult(raw=raw, summary=summary, curves=curves, output_dir=out)
