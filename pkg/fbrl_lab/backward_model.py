"""
Learned backward dynamics b(s', a) -> delta, used to imagine predecessors
s_hat = s' - delta_hat.

Two variants share one network shape (input = state + one-hot action):
  continuous   regresses delta directly with a Huber loss
  categorical  emits three logits per state variable for delta in {-1, 0, +1},
               trained with per-variable softmax cross-entropy
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .environments import GRIDWORLD
from .errors import RejectedConfigError, RejectedInputError
from .tensor_core import ADAM, huber_loss, init_mlp, mlp_forward, snapshot, softmax, train_step

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
VARIANTS = (CONTINUOUS, CATEGORICAL)

SAMPLE = "sample"
ARGMAX = "argmax"
SAMPLE_MODES = (SAMPLE, ARGMAX)

DELTA_VALUES = np.array([-1.0, 0.0, 1.0])


@dataclass
class BackwardConfig:
    variant: Optional[str] = None  # None picks the environment default
    hidden_dim: int = 100
    learning_rate: float = 1e-3
    sample_mode: str = SAMPLE
    batch_size: int = 100
    warmup_steps: int = 0  # updates on warmup data before the first episode

    def validate(self):
        if self.variant is not None and self.variant not in VARIANTS:
            raise RejectedConfigError(f"backward_variant must be one of {VARIANTS}, got '{self.variant}'")
        if self.sample_mode not in SAMPLE_MODES:
            raise RejectedConfigError(f"backward_sample_mode must be one of {SAMPLE_MODES}, got '{self.sample_mode}'")
        if self.hidden_dim < 1 or self.batch_size < 1:
            raise RejectedConfigError("backward hidden_dim and batch_size must be >= 1")
        if self.warmup_steps < 0:
            raise RejectedConfigError(f"backward_warmup_steps must be >= 0, got {self.warmup_steps}")
        if self.learning_rate <= 0:
            raise RejectedConfigError(f"backward learning_rate must be positive, got {self.learning_rate}")
        return self


@dataclass
class BackwardModel:
    net: object
    variant: str
    learning_rate: float
    state_dim: int
    action_count: int
    value_bounds: Tuple[float, float]
    sample_mode: str = SAMPLE
    huber_delta: float = 1.0


@dataclass
class DeltaPrediction:
    delta: Optional[np.ndarray] = None          # continuous: (state_dim,)
    probabilities: Optional[np.ndarray] = None  # categorical: (state_dim, 3)


def default_variant(env_spec):
    return CONTINUOUS if env_spec.kind == GRIDWORLD else CATEGORICAL


def build_backward_model(env_spec, config, rng, optimizer=ADAM):
    config.validate()
    variant = config.variant or default_variant(env_spec)
    d = env_spec.state_dim
    output_dim = d if variant == CONTINUOUS else 3 * d
    net = init_mlp(d + env_spec.action_count, config.hidden_dim, output_dim, rng, optimizer=optimizer)
    return BackwardModel(
        net=net,
        variant=variant,
        learning_rate=config.learning_rate,
        state_dim=d,
        action_count=env_spec.action_count,
        value_bounds=env_spec.value_bounds,
        sample_mode=config.sample_mode,
    )


def model_snapshot(model):
    """Copy of the model whose network is read-only."""
    return BackwardModel(
        net=snapshot(model.net),
        variant=model.variant,
        learning_rate=model.learning_rate,
        state_dim=model.state_dim,
        action_count=model.action_count,
        value_bounds=model.value_bounds,
        sample_mode=model.sample_mode,
        huber_delta=model.huber_delta,
    )


def model_inputs(model, next_states, actions):
    s = np.atleast_2d(np.asarray(next_states, dtype=np.float64))
    a = np.atleast_1d(np.asarray(actions, dtype=np.int64))
    if s.shape[0] == 1 and a.shape[0] > 1:
        s = np.repeat(s, a.shape[0], axis=0)
    if np.any(a < 0) or np.any(a >= model.action_count):
        raise RejectedInputError(f"action ids {a} outside [0, {model.action_count})")
    one_hot = np.zeros((a.shape[0], model.action_count))
    one_hot[np.arange(a.shape[0]), a] = 1.0
    return np.concatenate([s, one_hot], axis=1)


def compute_delta(transition):
    return np.asarray(transition.next_state, dtype=np.float64) - np.asarray(transition.state, dtype=np.float64)


def delta_classes(deltas):
    """Map delta values -1/0/+1 to classes 0/1/2."""
    d = np.asarray(deltas, dtype=np.float64)
    rounded = np.rint(d)
    if np.any(np.abs(d - rounded) > 1e-9) or np.any(np.abs(rounded) > 1):
        raise RejectedInputError(f"categorical backward model needs deltas in {{-1, 0, +1}}, got {d}")
    return (rounded + 1).astype(np.int64)


def train_backward(model, batch):
    """
    One optimizer step on real transitions.

    Args:
        model: BackwardModel
        batch: TransitionBatch of real transitions

    Returns:
        Mean per-transition loss
    """
    if np.any(batch.imagined):
        raise RejectedInputError("backward model trains on real transitions only")

    deltas = batch.next_states - batch.states
    inputs = model_inputs(model, batch.next_states, batch.actions)
    out = mlp_forward(model.net, inputs)
    n = len(batch)

    if model.variant == CONTINUOUS:
        loss = huber_loss(out, deltas, model.huber_delta)
        train_step(model.net, inputs, loss.gradient_wrt_output, model.learning_rate)
        return loss.value / n

    classes = delta_classes(deltas)
    probs = softmax(out.reshape(n, model.state_dim, 3))
    picked = np.take_along_axis(probs, classes[..., None], axis=-1)[..., 0]
    value = float(-np.log(np.maximum(picked, 1e-300)).sum())
    grads = probs.copy()
    np.put_along_axis(grads, classes[..., None], picked[..., None] - 1.0, axis=-1)
    train_step(model.net, inputs, grads.reshape(n, -1), model.learning_rate)
    return value / n


def predict_delta(model, next_state, action):
    out = mlp_forward(model.net, model_inputs(model, next_state, action))[0]
    if model.variant == CONTINUOUS:
        return DeltaPrediction(delta=out)
    return DeltaPrediction(probabilities=softmax(out.reshape(model.state_dim, 3)))


def _sample_classes(probs, rng, mode):
    if mode == ARGMAX:
        return probs.argmax(axis=-1)
    u = rng.random(probs.shape[:-1])
    cumulative = np.cumsum(probs, axis=-1)
    return np.minimum((u[..., None] >= cumulative).sum(axis=-1), 2)


def predict_previous_batch(model, next_state, actions, rng, clip=True):
    """
    Predecessors of one next_state under each action in `actions`.

    Returns:
        (len(actions), state_dim) array
    """
    s_next = np.asarray(next_state, dtype=np.float64).reshape(-1)
    out = mlp_forward(model.net, model_inputs(model, s_next, actions))
    if model.variant == CONTINUOUS:
        previous = s_next - out
    else:
        probs = softmax(out.reshape(out.shape[0], model.state_dim, 3))
        previous = s_next - DELTA_VALUES[_sample_classes(probs, rng, model.sample_mode)]
    if clip:
        low, high = model.value_bounds
        previous = np.clip(previous, low, high)
    return previous


def predict_previous(model, next_state, action, rng, clip=True):
    """s_hat = s' - delta_hat, clipped to the environment's value range."""
    return predict_previous_batch(model, next_state, [int(action)], rng, clip=clip)[0]


def delta_mse(model, transitions):
    """Mean squared error of the continuous delta prediction."""
    errors = [np.mean((predict_delta(model, t.next_state, t.action).delta - compute_delta(t)) ** 2)
              for t in transitions]
    return float(np.mean(errors))


def argmax_accuracy(model, transitions):
    """Fraction of variable slots whose most likely class equals the true delta class."""
    hits = total = 0
    for t in transitions:
        predicted = predict_delta(model, t.next_state, t.action).probabilities.argmax(axis=1)
        truth = delta_classes(compute_delta(t))
        hits += int((predicted == truth).sum())
        total += truth.size
    return hits / total


def consistent_argmax_accuracy(model, transitions):
    """
    Like argmax_accuracy, but a slot counts as correct when its most likely
    class is the true class of any transition sharing the same (s', a).

    Several predecessors can lead to one (s', a) (in Hanoi the smallest disc
    may arrive from either other pillar), so no model can reach full plain
    accuracy on such pairs.
    """
    attainable = {}
    for t in transitions:
        key = (tuple(np.asarray(t.next_state).tolist()), int(t.action))
        classes = delta_classes(compute_delta(t))
        sets = attainable.setdefault(key, [set() for _ in classes])
        for slot, cls in enumerate(classes):
            sets[slot].add(int(cls))

    hits = total = 0
    for t in transitions:
        key = (tuple(np.asarray(t.next_state).tolist()), int(t.action))
        predicted = predict_delta(model, t.next_state, t.action).probabilities.argmax(axis=1)
        for slot, cls in enumerate(predicted):
            hits += int(int(cls) in attainable[key][slot])
            total += 1
    return hits / total
