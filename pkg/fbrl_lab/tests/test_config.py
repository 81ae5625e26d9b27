from pathlib import Path

import pytest

from fbrl_lab.config import (DDQN, FBRL, default_experiment_config, dump_config, load_config,
                             parse_config_text)
from fbrl_lab.environments import GRIDWORLD, HANOI
from fbrl_lab.errors import RejectedConfigError

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


def test_minimal_config_uses_published_defaults():
    config = parse_config_text("environment = gridworld\nsize = 10\n")
    assert config.method == DDQN
    assert config.environment.horizon == 100
    assert config.total_episodes == 500
    assert config.agent.learning_rate == 1e-3
    assert config.agent.epsilon_decay_steps == 10000
    assert config.trials == 10


def test_fbrl_hanoi_defaults():
    config = default_experiment_config(HANOI, 3, FBRL)
    assert config.environment.horizon == 100
    assert config.total_episodes == 1000
    assert config.agent.learning_rate == 1e-4
    assert config.agent.target_sync_period == 500
    assert config.imagination.steps_per_rollout == 5
    assert config.imagination.stream_count == 3
    assert config.backward.hidden_dim == 100
    assert config.imagination.rollout_period == 1
    assert config.imagination.skip_goal_origin is True
    assert config.backward.warmup_steps == 1000


def test_fbrl_gridworld_defaults():
    config = default_experiment_config(GRIDWORLD, 20, FBRL)
    assert config.environment.horizon == 200
    assert config.agent.learning_rate == 5e-3
    assert config.imagination.steps_per_rollout == 10
    assert config.imagination.stream_count == 1
    assert config.imagination.rollout_period == 1
    assert config.imagination.skip_goal_origin is True


def test_overrides_and_comments():
    text = """
# tiny run
environment = gridworld
size = 5
method = fbrl
total_episodes = 20   # short
horizon = 30
imagination_strategy = greedy
backward_variant = categorical
deterministic = false
"""
    config = parse_config_text(text)
    assert config.environment.horizon == 30
    assert config.imagination.strategy == "greedy"
    assert config.backward.variant == "categorical"
    assert config.deterministic_mode is False
    assert config.agent.epsilon_decay_steps == int(0.2 * 20 * 30)


def test_imagination_cadence_keys():
    text = """
environment = gridworld
size = 5
method = fbrl
imagination_period = 1
imagination_skip_goal_origin = no
backward_warmup_steps = 0
"""
    config = parse_config_text(text)
    assert config.imagination.rollout_period == 1
    assert config.imagination.skip_goal_origin is False
    assert config.backward.warmup_steps == 0
    assert parse_config_text(dump_config(config)) == config


def test_explicit_epsilon_decay_is_kept():
    config = parse_config_text("environment = hanoi\nsize = 2\nepsilon_decay_steps = 77\n")
    assert config.agent.epsilon_decay_steps == 77


@pytest.mark.parametrize("text, fragment", [
    ("environment = gridworld\nsize = 5\ncolour = blue\n", "Unknown key 'colour'"),
    ("environment = gridworld\nsize = 5\nsize = 6\n", "Duplicate key 'size'"),
    ("environment = gridworld\nsize 5\n", "Malformed line"),
    ("size = 5\n", "Missing required key 'environment'"),
    ("environment = gridworld\nsize = 5\nimagination_steps = 3\n", "only apply to method = fbrl"),
    ("environment = gridworld\nsize = 5\ntrials = many\n", "Bad value for 'trials'"),
    ("environment = gridworld\nsize = 1\n", "size"),
    ("environment = gridworld\nsize = 5\ngamma = 1.0\n", "gamma"),
    ("environment = gridworld\nsize = 5\nmethod = fbrl\nimagination_period = 0\n", "imagination_period"),
    ("environment = gridworld\nsize = 5\nmethod = fbrl\nbackward_warmup_steps = -1\n", "backward_warmup_steps"),
    ("environment = gridworld\nsize = 5\nmethod = fbrl\nimagination_skip_goal_origin = maybe\n", "Bad value"),
])
def test_rejected_configs(text, fragment):
    with pytest.raises(RejectedConfigError) as excinfo:
        parse_config_text(text, source="t.cfg")
    assert fragment in str(excinfo.value)


def test_error_names_file_and_line():
    with pytest.raises(RejectedConfigError, match=r"t\.cfg:3"):
        parse_config_text("environment = hanoi\nsize = 2\nbogus = 1\n", source="t.cfg")


@pytest.mark.parametrize("kind, size, method", [(GRIDWORLD, 10, FBRL), (HANOI, 3, DDQN)])
def test_dump_reads_back(kind, size, method):
    config = default_experiment_config(kind, size, method)
    config.seed = 42
    again = parse_config_text(dump_config(config))
    assert again == config


def test_shipped_configs_load():
    files = sorted(CONFIG_DIR.glob("*.cfg"))
    assert len(files) == 12
    for path in files:
        config = load_config(path)
        assert config.method == path.stem.split("_")[1]
        assert path.stem.startswith(config.environment.kind)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config("no/such/file.cfg")
