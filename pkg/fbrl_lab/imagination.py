"""
Backward imagination: roll from a goal state towards its predecessors with
the learned backward model and feed the imagined transitions to the shared
replay buffer.

Streams either run inline (deterministic mode, one rollout per stream after
each forward step) or as background threads that work from the latest
published snapshots.
"""

import logging
import threading
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .backward_model import predict_previous, predict_previous_batch
from .environments import is_goal, reward_query, sample_goal
from .errors import RejectedConfigError
from .replay_buffer import Transition
from .tensor_core import mlp_forward

logger = logging.getLogger(__name__)

RANDOM = "random"
GREEDY = "greedy"
MIXED = "mixed"
STRATEGIES = (RANDOM, GREEDY, MIXED)


@dataclass
class ImaginationConfig:
    steps_per_rollout: int = 10
    stream_count: int = 1
    strategy: str = MIXED
    p_random: float = 0.5
    rollout_period: int = 1  # forward steps per inline round
    skip_goal_origin: bool = False

    def validate(self):
        if self.steps_per_rollout < 1:
            raise RejectedConfigError(f"imagination_steps must be >= 1, got {self.steps_per_rollout}")
        if self.stream_count < 1:
            raise RejectedConfigError(f"imagination_streams must be >= 1, got {self.stream_count}")
        if self.strategy not in STRATEGIES:
            raise RejectedConfigError(f"imagination_strategy must be one of {STRATEGIES}, got '{self.strategy}'")
        if not 0.0 <= self.p_random <= 1.0:
            raise RejectedConfigError(f"imagination_p_random must lie in [0, 1], got {self.p_random}")
        if self.rollout_period < 1:
            raise RejectedConfigError(f"imagination_period must be >= 1, got {self.rollout_period}")
        return self


def _choose(strategy, s_next, q_snapshot, model_snapshot, rng, p_random, env_spec=None):
    """
    Returns (action, predecessor) where predecessor is None unless it was computed.

    With env_spec given, candidates whose predecessor is a goal state are
    excluded while any other candidate remains.
    """
    action_count = q_snapshot.output_dim
    if strategy == MIXED:
        strategy = RANDOM if rng.random() < p_random else GREEDY
    if strategy == RANDOM and env_spec is None:
        return int(rng.integers(action_count)), None

    candidates = predict_previous_batch(model_snapshot, s_next, np.arange(action_count), rng)
    allowed = np.ones(action_count, dtype=bool)
    if env_spec is not None:
        allowed = np.array([not is_goal(env_spec, c) for c in candidates])
        if not allowed.any():
            allowed[:] = True
    if strategy == RANDOM:
        action = int(rng.choice(np.flatnonzero(allowed)))
    else:
        q = np.diag(mlp_forward(q_snapshot, candidates))
        action = int(np.argmax(np.where(allowed, q, -np.inf)))
    return action, candidates[action]


def sample_imagination_action(strategy, s_next, q_snapshot, model_snapshot, rng, p_random=0.5, env_spec=None):
    """
    Pick the action to reverse from s_next.

    random: uniform. greedy: for each candidate action a, imagine the
    predecessor s_hat(a) and take argmax_a Q(s_hat(a), a), first index on ties.
    mixed: random with probability p_random, otherwise greedy. Passing env_spec
    rules out actions whose imagined predecessor is a goal state, unless all are.
    """
    action, _ = _choose(strategy, s_next, q_snapshot, model_snapshot, rng, p_random, env_spec)
    return action


def backward_rollout(env_spec, config, q_snapshot, model_snapshot, rng) -> List[Transition]:
    """
    Imagine config.steps_per_rollout transitions backwards from a sampled goal.

    Transitions come out in generation order, so transition i's next_state is
    transition i-1's state. Rewards and terminal flags are those of the entered
    state (the next_state). With config.skip_goal_origin, a transition starts at
    a goal state only when every candidate predecessor is one.
    """
    s_next = sample_goal(env_spec, rng)
    goal_filter = env_spec if config.skip_goal_origin else None
    transitions = []
    for _ in range(config.steps_per_rollout):
        action, previous = _choose(config.strategy, s_next, q_snapshot, model_snapshot, rng, config.p_random,
                                   goal_filter)
        if previous is None:
            previous = predict_previous(model_snapshot, s_next, action, rng)
        transitions.append(Transition(
            state=previous,
            action=action,
            reward=reward_query(env_spec, s_next),
            next_state=s_next,
            terminal=is_goal(env_spec, s_next),
            imagined=True,
        ))
        s_next = previous
    return transitions


class SnapshotBoard:
    """Latest read-only (Q network, backward model) pair, swapped atomically."""

    def __init__(self, q_snapshot=None, model_snapshot=None):
        self._lock = threading.Lock()
        self._pair = (q_snapshot, model_snapshot)
        self.version = 0

    def publish(self, q_snapshot, model_snapshot):
        with self._lock:
            self._pair = (q_snapshot, model_snapshot)
            self.version += 1

    def current(self):
        with self._lock:
            return self._pair


class ImaginationEngine:
    """
    Owns the imagination streams of one trial.

    Args:
        env_spec: EnvironmentSpec
        config: ImaginationConfig
        buffer: ReplayBuffer shared with the forward learner
        snapshot_source: SnapshotBoard
        stream_rngs: one numpy Generator per stream
        deterministic: run rollouts inline via after_forward_step instead of threads
    """

    def __init__(self, env_spec, config, buffer, snapshot_source, stream_rngs, deterministic=True):
        config.validate()
        if len(stream_rngs) != config.stream_count:
            raise RejectedConfigError(
                f"{len(stream_rngs)} generators for {config.stream_count} streams"
            )
        self.env_spec = env_spec
        self.config = config
        self.buffer = buffer
        self.snapshot_source = snapshot_source
        self.stream_rngs = list(stream_rngs)
        self.deterministic = deterministic
        self.rollouts = 0
        self.forward_steps = 0
        self._count_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: List[threading.Thread] = []
        self.error: Optional[BaseException] = None

    def _rollout(self, stream):
        q, model = self.snapshot_source.current()
        transitions = backward_rollout(self.env_spec, self.config, q, model, self.stream_rngs[stream])
        self.buffer.extend(transitions)
        with self._count_lock:
            self.rollouts += 1
        return len(transitions)

    def rollout_round(self):
        """One rollout per stream, streams in index order. Returns transitions appended."""
        return sum(self._rollout(stream) for stream in range(self.config.stream_count))

    def after_forward_step(self):
        if self.deterministic:
            self.forward_steps += 1
            if self.forward_steps % self.config.rollout_period:
                return 0
            return self.rollout_round()
        if self.error is not None:
            raise self.error
        return 0

    def _worker(self, stream):
        try:
            while not self._stop.is_set():
                self._rollout(stream)
        except BaseException as e:
            logger.warning("imagination stream %d stopped: %s", stream, e)
            self.error = e

    def run_streams(self):
        """Start background streams; a no-op in deterministic mode."""
        if self.deterministic or self._threads:
            return
        self._stop.clear()
        for stream in range(self.config.stream_count):
            thread = threading.Thread(target=self._worker, args=(stream,), name=f"imagination-{stream}", daemon=True)
            thread.start()
            self._threads.append(thread)
        logger.debug("started %d imagination stream(s)", len(self._threads))

    def stop(self):
        self._stop.set()
        for thread in self._threads:
            thread.join()
        self._threads = []

    def __enter__(self):
        self.run_streams()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.stop()
        return False
