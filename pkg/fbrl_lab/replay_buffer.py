"""
Bounded FIFO replay memory shared by real and imagined experience.
"""

import threading
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from .errors import InsufficientDataError, RejectedInputError

DEFAULT_CAPACITY = 10000


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool
    imagined: bool = False


@dataclass
class TransitionBatch:
    """Column-stacked view of a list of transitions."""
    states: np.ndarray       # (n, state_dim)
    actions: np.ndarray      # (n,) int
    rewards: np.ndarray      # (n,)
    next_states: np.ndarray  # (n, state_dim)
    terminals: np.ndarray    # (n,) float 0/1
    imagined: np.ndarray     # (n,) bool

    def __len__(self):
        return self.actions.shape[0]


def stack_transitions(transitions: List[Transition]) -> TransitionBatch:
    if not transitions:
        raise RejectedInputError("cannot stack an empty batch")
    return TransitionBatch(
        states=np.stack([t.state for t in transitions]).astype(np.float64),
        actions=np.array([t.action for t in transitions], dtype=np.int64),
        rewards=np.array([t.reward for t in transitions], dtype=np.float64),
        next_states=np.stack([t.next_state for t in transitions]).astype(np.float64),
        terminals=np.array([t.terminal for t in transitions], dtype=np.float64),
        imagined=np.array([t.imagined for t in transitions], dtype=bool),
    )


class ReplayBuffer:
    """
    Ring buffer with uniform sampling with replacement.

    Appends and samples take one lock, so concurrent producers and consumers
    observe a single total order of operations.
    """

    def __init__(self, capacity=DEFAULT_CAPACITY):
        if capacity < 1:
            raise RejectedInputError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._memory: List[Transition] = []
        self._next_index = 0
        self._lock = threading.Lock()
        self.insertion_counter = 0
        self.imagined_counter = 0

    def __len__(self):
        return len(self._memory)

    def _store(self, transition):
        if len(self._memory) < self.capacity:
            self._memory.append(transition)
        else:
            self._memory[self._next_index] = transition
        self._next_index = (self._next_index + 1) % self.capacity
        self.insertion_counter += 1
        if transition.imagined:
            self.imagined_counter += 1

    def append(self, transition: Transition):
        with self._lock:
            self._store(transition)
        return self

    def extend(self, transitions: Iterable[Transition]):
        """Append several transitions as one atomic operation."""
        with self._lock:
            for t in transitions:
                self._store(t)
        return self

    def sample(self, batch_size, rng) -> List[Transition]:
        if batch_size < 1:
            raise RejectedInputError(f"batch size must be >= 1, got {batch_size}")
        with self._lock:
            size = len(self._memory)
            if size < batch_size:
                raise InsufficientDataError(
                    f"buffer holds {size} transition(s), {batch_size} requested"
                )
            indices = rng.integers(0, size, size=batch_size)
            return [self._memory[i] for i in indices]

    def contents(self) -> List[Transition]:
        """Stored transitions, oldest first."""
        with self._lock:
            if len(self._memory) < self.capacity:
                return list(self._memory)
            return self._memory[self._next_index:] + self._memory[:self._next_index]
