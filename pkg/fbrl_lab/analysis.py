"""
Post-processing of run directories: trend metrics, method comparison and
learning-curve plots.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .config import load_config
from .harness import CONFIG_FILE, FINAL_WINDOW, RAW_FILE, summarize

logger = logging.getLogger(__name__)

GNUPLOT_SUFFIXES = (".dat", ".txt")


@dataclass
class RunData:
    path: Path
    raw: pd.DataFrame
    config: Optional[object]

    @property
    def summary(self):
        return summarize(self.raw)


def load_run_dir(path):
    path = Path(path)
    raw_path = path / RAW_FILE
    if not raw_path.exists():
        raise FileNotFoundError(f"No {RAW_FILE} in {path}. Run an experiment with --out {path} first.")
    raw = pd.read_csv(raw_path)
    config_path = path / CONFIG_FILE
    config = load_config(config_path) if config_path.exists() else None
    return RunData(path=path, raw=raw, config=config)


def area_under_curve(mean_returns):
    """Sum of per-episode mean returns (unit episode spacing)."""
    return float(np.sum(np.asarray(mean_returns, dtype=np.float64)))


def final_window_mean(returns, window=FINAL_WINDOW):
    values = np.asarray(returns, dtype=np.float64)
    return float(values[-min(window, values.size):].mean())


def goal_reached(returns, horizon, step_cost):
    """An episode that never enters the goal returns exactly horizon * step_cost."""
    return np.asarray(returns, dtype=np.float64) > horizon * step_cost + 1e-6


def first_goal_episodes(raw, horizon, step_cost):
    """First goal-reaching episode per trial; inf for trials that never reach it."""
    firsts = {}
    for trial, frame in raw.sort_values(["trial", "episode"]).groupby("trial"):
        hits = frame["episode"].to_numpy()[goal_reached(frame["return"], horizon, step_cost)]
        firsts[trial] = float(hits[0]) if hits.size else float("inf")
    return pd.Series(firsts, name="first_goal_episode")


def compare_runs(run_a, run_b, window=FINAL_WINDOW):
    """
    Per-episode mean-return difference (a - b) and a final-window summary.

    Returns:
        (per_episode DataFrame, summary dict)
    """
    sa, sb = run_a.summary, run_b.summary
    merged = sa[["episode", "mean_return"]].merge(
        sb[["episode", "mean_return"]], on="episode", suffixes=("_a", "_b"))
    merged["difference"] = merged["mean_return_a"] - merged["mean_return_b"]

    summary = {
        "episodes": int(len(merged)),
        "final_window": int(min(window, len(merged))),
        "final_mean_a": final_window_mean(merged["mean_return_a"], window),
        "final_mean_b": final_window_mean(merged["mean_return_b"], window),
        "auc_a": area_under_curve(merged["mean_return_a"]),
        "auc_b": area_under_curve(merged["mean_return_b"]),
    }
    summary["final_difference"] = summary["final_mean_a"] - summary["final_mean_b"]
    for label, run in (("a", run_a), ("b", run_b)):
        if run.config is None:
            continue
        env = run.config.environment
        firsts = first_goal_episodes(run.raw, env.horizon, env.step_cost)
        summary[f"median_first_goal_{label}"] = float(firsts.median())
    return merged, summary


def write_gnuplot_data(summary, out_file):
    out = Path(out_file)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# episode mean_return stderr_return"]
    lines += [f"{int(e)} {m!r} {s!r}" for e, m, s in
              zip(summary["episode"], summary["mean_return"], summary["stderr_return"])]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def plot_run(run, out_file):
    """
    Plot mean return with a +-stderr band, or write gnuplot data for
    .dat/.txt targets.
    """
    summary = run.summary
    out = Path(out_file)
    if out.suffix in GNUPLOT_SUFFIXES:
        return write_gnuplot_data(summary, out)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out.parent.mkdir(parents=True, exist_ok=True)
    episodes = summary["episode"].to_numpy()
    mean = summary["mean_return"].to_numpy()
    err = summary["stderr_return"].to_numpy()
    label = run.path.name
    if run.config is not None:
        env = run.config.environment
        label = f"{run.config.method.upper()} {env.kind} n={env.size}"

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(episodes, mean, label=label)
    ax.fill_between(episodes, mean - err, mean + err, alpha=0.25)
    ax.set_xlabel("episode")
    ax.set_ylabel("return")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    logger.debug("wrote plot %s", out)
    return out
