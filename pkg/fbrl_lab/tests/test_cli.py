import subprocess
import sys
from pathlib import Path

import pytest

from fbrl_lab.main import main

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

TINY = """
environment = gridworld
size = 3
method = {method}
horizon = 20
trials = 2
total_episodes = 4
warmup_samples = 100
batch_size = 16
hidden_dim = 8
replay_capacity = 500
"""


def write_config(tmp_path, method, extra=""):
    path = tmp_path / f"{method}.cfg"
    path.write_text(TINY.format(method=method) + extra, encoding="utf-8")
    return path


def test_oracle_prints_shortest_path(capsys):
    assert main(["oracle", "--config", str(CONFIG_DIR / "hanoi3_fbrl.cfg")]) == 0
    out = capsys.readouterr().out
    assert "States: 27" in out
    assert "Greedy policy path length: 7" in out
    assert "Shortest path: 7 steps" in out


def test_oracle_gridworld_value_grid(capsys):
    assert main(["oracle", "--config", str(CONFIG_DIR / "gridworld5_ddqn.cfg")]) == 0
    out = capsys.readouterr().out
    assert "V*(start) = 0.864131" in out
    assert "Greedy policy path length: 8" in out
    assert "Shortest path: 8 steps" in out
    assert "Optimal return: 0.9300" in out
    assert "V* grid" in out


def test_run_compare_plot_and_runs(tmp_path, capsys):
    fbrl_cfg = write_config(tmp_path, "fbrl", "backward_batch_size = 16\nimagination_steps = 2\nbackward_warmup_steps = 10\n")
    ddqn_cfg = write_config(tmp_path, "ddqn")
    ledger = tmp_path / "runs.db"
    fbrl_out, ddqn_out = tmp_path / "fbrl", tmp_path / "ddqn"

    assert main(["run", "--config", str(fbrl_cfg), "--out", str(fbrl_out), "--ledger", str(ledger),
                 "--checkpoint"]) == 0
    assert main(["run", "--config", str(ddqn_cfg), "--out", str(ddqn_out), "--ledger", str(ledger),
                 "--trials", "1", "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "trial 1 (seed 1)" in out
    assert "trial 0 (seed 5)" in out
    assert (fbrl_out / "checkpoints" / "trial1_backward.fbrlnn").exists()

    assert main(["compare", "--a", str(fbrl_out), "--b", str(ddqn_out), "--window", "2"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("episode,mean_a,mean_b,difference")
    assert "Final 2-episode mean" in out

    assert main(["plot", "--in", str(fbrl_out), "--out", str(tmp_path / "curve.dat")]) == 0
    assert (tmp_path / "curve.dat").exists()

    assert main(["runs", "--db", str(ledger), "--method", "fbrl"]) == 0
    out = capsys.readouterr().out
    assert "1 run(s)" in out
    assert "finished" in out


def test_runs_without_ledger(tmp_path, capsys):
    assert main(["runs", "--db", str(tmp_path / "none.db")]) == 1
    assert "[ERROR]" in capsys.readouterr().out


@pytest.mark.parametrize("text, fragment", [
    ("environment = gridworld\nsize = 5\ncolour = red\n", "Unknown key 'colour'"),
    ("environment = gridworld\nsize = 5\nimagination_steps = 2\n", "only apply to method = fbrl"),
])
def test_run_rejects_bad_config(tmp_path, capsys, text, fragment):
    path = tmp_path / "bad.cfg"
    path.write_text(text, encoding="utf-8")
    assert main(["run", "--config", str(path), "--ledger", str(tmp_path / "runs.db")]) == 1
    out = capsys.readouterr().out
    assert "[ERROR]" in out and fragment in out


def test_missing_config_file_exit_code():
    result = subprocess.run([sys.executable, "-m", "fbrl_lab.main", "run", "--config", "nope.cfg"],
                            capture_output=True, text=True)
    assert result.returncode == 1
    assert "[ERROR] Config file not found" in result.stdout
