"""
Double DQN learner: epsilon-greedy acting, double-Q TD targets and a
periodically synchronized target network.
"""

import copy
import logging
from dataclasses import dataclass

import numpy as np

from .errors import RejectedConfigError
from .replay_buffer import stack_transitions
from .tensor_core import (ADAM, OPTIMIZERS, copy_parameters, huber_loss, init_mlp,
                          mlp_forward, snapshot, train_step)

logger = logging.getLogger(__name__)


@dataclass
class AgentConfig:
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_decay_steps: int = 10000
    learning_rate: float = 1e-3
    target_sync_period: int = 100
    hidden_dim: int = 32
    warmup_samples: int = 10000
    batch_size: int = 100
    optimizer: str = ADAM
    huber_delta: float = 1.0

    def validate(self):
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise RejectedConfigError(
                f"need 0 <= epsilon_end ({self.epsilon_end}) <= epsilon_start ({self.epsilon_start}) <= 1"
            )
        if not 0.0 < self.gamma < 1.0:
            raise RejectedConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.learning_rate <= 0:
            raise RejectedConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("target_sync_period", "hidden_dim", "batch_size"):
            if getattr(self, name) < 1:
                raise RejectedConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epsilon_decay_steps < 0 or self.warmup_samples < 0:
            raise RejectedConfigError("epsilon_decay_steps and warmup_samples must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise RejectedConfigError(f"optimizer must be one of {OPTIMIZERS}, got '{self.optimizer}'")
        if self.huber_delta <= 0:
            raise RejectedConfigError(f"huber_delta must be positive, got {self.huber_delta}")
        return self


@dataclass
class DdqnAgent:
    online: object
    target: object
    config: AgentConfig
    step_counter: int = 0   # learn steps; drives target sync
    env_steps: int = 0      # training-phase environment steps; drives epsilon

    @property
    def action_count(self) -> int:
        return self.online.output_dim


def build_agent(state_dim, action_count, config, rng):
    config.validate()
    online = init_mlp(state_dim, config.hidden_dim, action_count, rng, optimizer=config.optimizer)
    target = copy.deepcopy(online)
    return DdqnAgent(online=online, target=target, config=config)


def epsilon_schedule(config, step):
    """Linear from epsilon_start to epsilon_end over epsilon_decay_steps, then flat."""
    if step >= config.epsilon_decay_steps:
        return config.epsilon_end
    frac = step / config.epsilon_decay_steps
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)


def greedy_action(q_values):
    """Argmax with first-index tie-break."""
    return int(np.argmax(q_values))


def select_action(agent, state, rng, epsilon=None):
    """
    Epsilon-greedy action from the online network.

    epsilon defaults to the schedule value at the agent's env_steps.
    """
    eps = epsilon_schedule(agent.config, agent.env_steps) if epsilon is None else epsilon
    if rng.random() < eps:
        return int(rng.integers(agent.action_count))
    return greedy_action(mlp_forward(agent.online, state))


def td_targets(agent, batch):
    """
    Double-Q targets: online picks argmax at s', target evaluates it.
    Terminal transitions do not bootstrap.
    """
    q_online_next = mlp_forward(agent.online, batch.next_states)
    q_target_next = mlp_forward(agent.target, batch.next_states)
    best = q_online_next.argmax(axis=1)
    bootstrap = q_target_next[np.arange(len(batch)), best]
    return batch.rewards + agent.config.gamma * (1.0 - batch.terminals) * bootstrap


def learn_step(agent, buffer, rng):
    """
    One Huber-loss update of the online network on a sampled batch.

    Returns:
        Mean per-transition loss of the batch
    """
    cfg = agent.config
    batch = stack_transitions(buffer.sample(cfg.batch_size, rng))
    targets = td_targets(agent, batch)

    rows = np.arange(len(batch))
    q = mlp_forward(agent.online, batch.states)
    loss = huber_loss(q[rows, batch.actions], targets, cfg.huber_delta)
    output_grads = np.zeros_like(q)
    output_grads[rows, batch.actions] = loss.gradient_wrt_output
    train_step(agent.online, batch.states, output_grads, cfg.learning_rate)

    agent.step_counter += 1
    if agent.step_counter % cfg.target_sync_period == 0:
        sync_target(agent)
    return loss.value / len(batch)


def sync_target(agent):
    copy_parameters(agent.online, agent.target)
    logger.debug("target network synchronized at learn step %d", agent.step_counter)
    return agent


def q_snapshot(agent):
    return snapshot(agent.online)
