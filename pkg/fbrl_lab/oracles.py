"""
Exact solvers over the enumerable state spaces, used as acceptance oracles.
"""

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .environments import enumerate_states, is_goal, reset, state_key, step


@dataclass
class TransitionTable:
    states: List[np.ndarray]
    index: Dict[tuple, int]
    next_index: np.ndarray  # (S, A)
    rewards: np.ndarray     # (S, A) reward of the entered state
    goal: np.ndarray        # (S,) bool


@dataclass
class ValueIterationResult:
    states: List[np.ndarray]
    index: Dict[tuple, int]
    values: np.ndarray   # V*(s); 0 at goal states
    policy: np.ndarray   # greedy action per state
    q_values: np.ndarray  # (S, A)
    iterations: int

    def value_of(self, state):
        return float(self.values[self.index[state_key(state)]])

    def action_for(self, state):
        return int(self.policy[self.index[state_key(state)]])


def build_transition_table(env_spec):
    states = enumerate_states(env_spec)
    index = {state_key(s): i for i, s in enumerate(states)}
    n_states, n_actions = len(states), env_spec.action_count
    next_index = np.zeros((n_states, n_actions), dtype=np.int64)
    rewards = np.zeros((n_states, n_actions))
    for i, s in enumerate(states):
        for a in range(n_actions):
            nxt, r, _ = step(env_spec, s, a)
            next_index[i, a] = index[state_key(nxt)]
            rewards[i, a] = r
    goal = np.array([is_goal(env_spec, s) for s in states])
    return TransitionTable(states, index, next_index, rewards, goal)


def value_iteration_oracle(env_spec, gamma, tolerance=1e-10, max_iterations=100000):
    """
    Bellman optimality backups until the sup-norm change drops below tolerance.

    Goal states are terminal (value 0); entering one pays goal_reward and
    stops bootstrapping.
    """
    table = build_transition_table(env_spec)
    continue_mask = 1.0 - table.goal[table.next_index]
    values = np.zeros(len(table.states))
    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        q = table.rewards + gamma * continue_mask * values[table.next_index]
        updated = np.where(table.goal, 0.0, q.max(axis=1))
        residual = np.max(np.abs(updated - values))
        values = updated
        if residual < tolerance:
            break
    q = table.rewards + gamma * continue_mask * values[table.next_index]
    return ValueIterationResult(
        states=table.states,
        index=table.index,
        values=values,
        policy=q.argmax(axis=1),
        q_values=q,
        iterations=iterations,
    )


def policy_path_length(env_spec, result, max_steps=None):
    """Steps the greedy oracle policy needs from reset to goal, or None if it never arrives."""
    limit = max_steps or len(result.states) + 1
    state = reset(env_spec)
    for steps in range(limit + 1):
        if is_goal(env_spec, state):
            return steps
        state, _, _ = step(env_spec, state, result.action_for(state))
    return None


def bfs_shortest_path(env_spec) -> Optional[int]:
    """Minimal number of steps from reset to the goal; None when unreachable."""
    start = reset(env_spec)
    if is_goal(env_spec, start):
        return 0
    seen = {state_key(start)}
    frontier = deque([(start, 0)])
    while frontier:
        state, depth = frontier.popleft()
        for a in range(env_spec.action_count):
            nxt, _, terminal = step(env_spec, state, a)
            if terminal:
                return depth + 1
            key = state_key(nxt)
            if key not in seen:
                seen.add(key)
                frontier.append((nxt, depth + 1))
    return None
