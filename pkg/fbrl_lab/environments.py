"""
Task environments as goal-augmented MDPs.

Gridworld: state [x, y], start (0, 0), goal (n-1, n-1), actions up/down/left/right
with walls that clamp. Towers of Hanoi: 3n bits, one one-hot group per disc
(smallest disc first), start with every disc on pillar 1, goal with every disc
on pillar 3, action index 3*disc + pillar.

The reward is a function of the entered state only and can be queried on any
vector, including imagined states that break the real-state invariants.
"""

from dataclasses import dataclass
from itertools import product
from typing import List, Sequence, Tuple

import numpy as np

from .errors import RejectedInputError

GRIDWORLD = "gridworld"
HANOI = "hanoi"
KINDS = (GRIDWORLD, HANOI)

PILLARS = 3

# Gridworld action ids
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
GRID_MOVES = np.array([[0, 1], [0, -1], [-1, 0], [1, 0]], dtype=np.float64)


@dataclass(frozen=True)
class EnvironmentSpec:
    kind: str
    size: int
    horizon: int
    step_cost: float = -0.01
    goal_reward: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RejectedInputError(f"unknown environment '{self.kind}' (expected one of {KINDS})")
        if self.size < 2:
            raise RejectedInputError(f"size must be >= 2, got {self.size}")
        if self.horizon <= 0:
            raise RejectedInputError(f"horizon must be > 0, got {self.horizon}")

    @property
    def state_dim(self) -> int:
        return 2 if self.kind == GRIDWORLD else PILLARS * self.size

    @property
    def action_count(self) -> int:
        return 4 if self.kind == GRIDWORLD else PILLARS * self.size

    @property
    def value_bounds(self) -> Tuple[float, float]:
        """Range each state variable is clipped to after imagination."""
        return (0.0, float(self.size - 1)) if self.kind == GRIDWORLD else (0.0, 1.0)


def encode_hanoi(disc_pillars: Sequence[int], n: int) -> np.ndarray:
    """
    Encode 1-based pillar indices (smallest disc first) as 3n one-hot bits.

    Positional only: stacking legality is not checked here.
    """
    if len(disc_pillars) != n:
        raise RejectedInputError(f"expected {n} pillar indices, got {len(disc_pillars)}")
    state = np.zeros(PILLARS * n)
    for disc, pillar in enumerate(disc_pillars):
        if pillar not in (1, 2, 3):
            raise RejectedInputError(f"pillar {pillar} for disc {disc} outside 1..3")
        state[PILLARS * disc + pillar - 1] = 1.0
    return state


def decode_hanoi(state) -> List[int]:
    """1-based pillar of each disc, taking the largest bit of each group."""
    groups = np.asarray(state, dtype=np.float64).reshape(-1, PILLARS)
    return [int(i) + 1 for i in groups.argmax(axis=1)]


def reset(spec: EnvironmentSpec) -> np.ndarray:
    if spec.kind == GRIDWORLD:
        return np.zeros(2)
    return encode_hanoi([1] * spec.size, spec.size)


def sample_goal(spec: EnvironmentSpec, rng=None) -> np.ndarray:
    """The goal set is a singleton in both environments; rng is accepted for interface parity."""
    if spec.kind == GRIDWORLD:
        return np.full(2, float(spec.size - 1))
    return encode_hanoi([3] * spec.size, spec.size)


def is_goal(spec: EnvironmentSpec, state) -> bool:
    s = np.asarray(state, dtype=np.float64).reshape(-1)
    if s.size != spec.state_dim:
        return False
    if spec.kind == GRIDWORLD:
        return bool(s[0] == spec.size - 1 and s[1] == spec.size - 1)
    return bool(np.all(s[PILLARS - 1::PILLARS] == 1.0))


def reward_query(spec: EnvironmentSpec, state) -> float:
    """Total reward function of the entered state; never raises."""
    try:
        return spec.goal_reward if is_goal(spec, state) else spec.step_cost
    except (TypeError, ValueError):
        return spec.step_cost


def hanoi_move_is_legal(pillars: Sequence[int], disc: int, target: int) -> bool:
    """
    Disc (0 = smallest) may move to target pillar (1-based) when it is on top
    of its own pillar and no smaller disc sits on the target.
    """
    source = pillars[disc]
    if target == source:
        return False
    smaller = pillars[:disc]
    return source not in smaller and target not in smaller


def _check_action(spec, action):
    if isinstance(action, (bool, np.bool_)):
        raise RejectedInputError(f"action {action!r} is not an integer id")
    try:
        index = int(action)
    except (TypeError, ValueError):
        raise RejectedInputError(f"action {action!r} is not an integer id")
    if index != action or not 0 <= index < spec.action_count:
        raise RejectedInputError(f"action {action!r} outside [0, {spec.action_count})")
    return index


def step(spec: EnvironmentSpec, state, action):
    """
    Advance one step.

    Returns:
        (next_state, reward, terminal) where terminal means the goal was entered.
        Horizon truncation is the caller's responsibility.
    """
    a = _check_action(spec, action)
    s = np.asarray(state, dtype=np.float64)

    if spec.kind == GRIDWORLD:
        nxt = np.clip(s + GRID_MOVES[a], 0.0, spec.size - 1)
    else:
        disc, target = divmod(a, PILLARS)
        target += 1
        pillars = decode_hanoi(s)
        if hanoi_move_is_legal(pillars, disc, target):
            pillars[disc] = target
            nxt = encode_hanoi(pillars, spec.size)
        else:
            nxt = s.copy()

    return nxt, reward_query(spec, nxt), is_goal(spec, nxt)


def enumerate_states(spec: EnvironmentSpec) -> List[np.ndarray]:
    """
    Every real state: n*n grid cells, or all 3**n disc-to-pillar assignments
    (each assignment has exactly one legal stacking).
    """
    if spec.kind == GRIDWORLD:
        return [np.array([x, y], dtype=np.float64) for y in range(spec.size) for x in range(spec.size)]
    return [encode_hanoi(list(p), spec.size) for p in product((1, 2, 3), repeat=spec.size)]


def state_key(state) -> tuple:
    return tuple(float(v) for v in np.asarray(state).reshape(-1))
