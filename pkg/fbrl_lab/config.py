"""
Experiment configuration: dataclass, published defaults and the flat
`key = value` file format.
"""

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .backward_model import BackwardConfig
from .ddqn_agent import AgentConfig
from .environments import GRIDWORLD, EnvironmentSpec
from .errors import RejectedConfigError, RejectedInputError
from .imagination import ImaginationConfig

logger = logging.getLogger(__name__)

DDQN = "ddqn"
FBRL = "fbrl"
METHODS = (DDQN, FBRL)

EPSILON_DECAY_FRACTION = 0.2
# backward-model updates on warmup data before the first FBRL episode
BACKWARD_WARMUP_STEPS = 1000


@dataclass
class ExperimentConfig:
    environment: EnvironmentSpec
    agent: AgentConfig = field(default_factory=AgentConfig)
    imagination: Optional[ImaginationConfig] = None  # None = DDQN baseline
    backward: Optional[BackwardConfig] = None
    trials: int = 10
    total_episodes: int = 500
    seed: int = 0
    deterministic_mode: bool = True
    output_path: str = "results"
    replay_capacity: int = 10000
    jobs: int = 1

    @property
    def method(self) -> str:
        return FBRL if self.imagination is not None else DDQN

    def validate(self):
        """Reject inconsistent settings before any training starts."""
        if self.trials < 1:
            raise RejectedConfigError(f"trials must be >= 1, got {self.trials}")
        if self.total_episodes < 1:
            raise RejectedConfigError(f"total_episodes must be >= 1, got {self.total_episodes}")
        if self.jobs < 1:
            raise RejectedConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.replay_capacity < self.agent.batch_size:
            raise RejectedConfigError(
                f"replay_capacity {self.replay_capacity} is smaller than batch_size {self.agent.batch_size}"
            )
        if (self.imagination is None) != (self.backward is None):
            raise RejectedConfigError("imagination and backward settings go together (FBRL) or not at all (DDQN)")
        self.agent.validate()
        if self.imagination is not None:
            self.imagination.validate()
            self.backward.validate()
            if self.backward.batch_size > self.replay_capacity:
                raise RejectedConfigError(
                    f"backward_batch_size {self.backward.batch_size} exceeds replay_capacity {self.replay_capacity}"
                )
        return self


def default_horizon(kind, size):
    # 50/100/150/200 for grids 5/10/15/20; 50/100 for 2/3 discs
    return 10 * size if kind == GRIDWORLD else 50 * (size - 1)


def default_experiment_config(kind, size, method=DDQN, total_episodes=None):
    """Published settings for one environment instance and method."""
    if method not in METHODS:
        raise RejectedConfigError(f"method must be one of {METHODS}, got '{method}'")
    env = EnvironmentSpec(kind=kind, size=size, horizon=default_horizon(kind, size))
    episodes = total_episodes or (500 if kind == GRIDWORLD else 1000)

    if kind == GRIDWORLD:
        lr = 5e-3 if method == FBRL else 1e-3
        sync, steps, streams = 100, 10, 1
    else:
        lr = 1e-4 if method == FBRL else 5e-4
        sync, steps, streams = 500, 5, 3

    agent = AgentConfig(
        learning_rate=lr,
        target_sync_period=sync,
        epsilon_decay_steps=int(EPSILON_DECAY_FRACTION * episodes * env.horizon),
    )
    config = ExperimentConfig(environment=env, agent=agent, total_episodes=episodes)
    if method == FBRL:
        config.imagination = ImaginationConfig(steps_per_rollout=steps, stream_count=streams,
                                               skip_goal_origin=True)
        config.backward = BackwardConfig(warmup_steps=BACKWARD_WARMUP_STEPS)
    return config


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: '{text}'")


# key -> (section, attribute, parser); section None means ExperimentConfig itself
_ENV_KEYS = {
    "horizon": ("environment", "horizon", int),
    "step_cost": ("environment", "step_cost", float),
    "goal_reward": ("environment", "goal_reward", float),
}
_RUN_KEYS = {
    "trials": (None, "trials", int),
    "total_episodes": (None, "total_episodes", int),
    "seed": (None, "seed", int),
    "deterministic": (None, "deterministic_mode", _parse_bool),
    "output_path": (None, "output_path", str),
    "replay_capacity": (None, "replay_capacity", int),
    "jobs": (None, "jobs", int),
}
_AGENT_KEYS = {f.name: ("agent", f.name, f.type if f.type in (int, float, str) else type(f.default))
               for f in fields(AgentConfig)}
_IMAGINATION_KEYS = {
    "imagination_steps": ("imagination", "steps_per_rollout", int),
    "imagination_streams": ("imagination", "stream_count", int),
    "imagination_strategy": ("imagination", "strategy", str),
    "imagination_p_random": ("imagination", "p_random", float),
    "imagination_period": ("imagination", "rollout_period", int),
    "imagination_skip_goal_origin": ("imagination", "skip_goal_origin", _parse_bool),
}
_BACKWARD_KEYS = {
    "backward_variant": ("backward", "variant", str),
    "backward_hidden_dim": ("backward", "hidden_dim", int),
    "backward_learning_rate": ("backward", "learning_rate", float),
    "backward_sample_mode": ("backward", "sample_mode", str),
    "backward_batch_size": ("backward", "batch_size", int),
    "backward_warmup_steps": ("backward", "warmup_steps", int),
}
OVERRIDE_KEYS = {**_ENV_KEYS, **_RUN_KEYS, **_AGENT_KEYS, **_IMAGINATION_KEYS, **_BACKWARD_KEYS}
CONFIG_KEYS = ("environment", "size", "method", *OVERRIDE_KEYS)


def _read_pairs(text, source):
    """Split `key = value` lines; comments start with '#'."""
    pairs = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line_strip = line.split("#", 1)[0].strip()
        if not line_strip:
            continue
        if "=" not in line_strip:
            raise RejectedConfigError(f"Malformed line at {source}:{line_no} -> '{line.strip()}'")
        key, value = (part.strip() for part in line_strip.split("=", 1))
        if key not in CONFIG_KEYS:
            raise RejectedConfigError(f"Unknown key '{key}' at {source}:{line_no}")
        if key in pairs:
            raise RejectedConfigError(f"Duplicate key '{key}' at {source}:{line_no}")
        pairs[key] = (value, line_no)
    return pairs


def parse_config_text(text, source="<config>"):
    """
    Build an ExperimentConfig from config file text.

    `environment` and `size` are required; `method` defaults to ddqn. Every
    other key overrides the published default for that environment.
    """
    pairs = _read_pairs(text, source)
    for required in ("environment", "size"):
        if required not in pairs:
            raise RejectedConfigError(f"Missing required key '{required}' in {source}")

    method = pairs.get("method", (DDQN, 0))[0].lower()
    if method == DDQN:
        stray = [k for k in pairs if k in _IMAGINATION_KEYS or k in _BACKWARD_KEYS]
        if stray:
            raise RejectedConfigError(f"{source}: keys {stray} only apply to method = fbrl")

    try:
        kind = pairs["environment"][0].lower()
        size = int(pairs["size"][0])
        episodes = int(pairs["total_episodes"][0]) if "total_episodes" in pairs else None
        config = default_experiment_config(kind, size, method, total_episodes=episodes)
    except (RejectedInputError, ValueError) as e:
        raise RejectedConfigError(f"{source}: {e}") from e

    env_updates = {}
    for key, (value, line_no) in pairs.items():
        if key in ("environment", "size", "method"):
            continue
        section, attr, parser = OVERRIDE_KEYS[key]
        try:
            parsed = parser(value)
        except ValueError as e:
            raise RejectedConfigError(f"Bad value for '{key}' at {source}:{line_no}: {e}") from e
        if section == "environment":
            env_updates[attr] = parsed
        elif section is None:
            setattr(config, attr, parsed)
        else:
            setattr(getattr(config, section), attr, parsed)

    if env_updates:
        try:
            config.environment = replace(config.environment, **env_updates)
        except RejectedInputError as e:
            raise RejectedConfigError(f"{source}: {e}") from e

    if "epsilon_decay_steps" not in pairs:
        config.agent.epsilon_decay_steps = int(
            EPSILON_DECAY_FRACTION * config.total_episodes * config.environment.horizon
        )
    return config.validate()


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    config = parse_config_text(path.read_text(encoding="utf-8"), source=path.name)
    logger.debug("loaded %s config for %s n=%d from %s", config.method, config.environment.kind,
                 config.environment.size, path)
    return config


def dump_config(config):
    """Render a config in the file format; parse_config_text reads it back."""
    env = config.environment
    lines = [
        f"environment = {env.kind}",
        f"size = {env.size}",
        f"method = {config.method}",
        f"horizon = {env.horizon}",
        f"step_cost = {env.step_cost!r}",
        f"goal_reward = {env.goal_reward!r}",
    ]
    for key, (section, attr, _) in {**_RUN_KEYS, **_AGENT_KEYS}.items():
        owner = config if section is None else getattr(config, section)
        value = getattr(owner, attr)
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    if config.imagination is not None:
        for key, (section, attr, _) in {**_IMAGINATION_KEYS, **_BACKWARD_KEYS}.items():
            value = getattr(getattr(config, section), attr)
            if value is None:
                continue
            lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(lines) + "\n"
