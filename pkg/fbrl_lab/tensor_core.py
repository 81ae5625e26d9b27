"""
Dense two-layer network substrate.

Forward and backward passes for ``output = w2 . relu(w1 . x + b1) + b2``,
the Huber and softmax cross-entropy losses used to train it, Adam/SGD
updates, finite-difference gradient verification and a flat binary
checkpoint format.
"""

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .errors import RejectedInputError, TrainingError

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("w1", "b1", "w2", "b2")
CHECKPOINT_MAGIC = b"FBRLNN1"

ADAM = "adam"
SGD = "sgd"
OPTIMIZERS = (ADAM, SGD)


@dataclass
class MlpNetwork:
    """Weights, biases and optimizer moments of a 2-layer ReLU network."""
    w1: np.ndarray  # (hidden_dim, input_dim)
    b1: np.ndarray  # (hidden_dim,)
    w2: np.ndarray  # (output_dim, hidden_dim)
    b2: np.ndarray  # (output_dim,)
    optimizer: str = ADAM
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    first_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    update_count: int = 0

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[0]

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}


@dataclass
class LossValue:
    value: float
    gradient_wrt_output: np.ndarray


def init_mlp(input_dim, hidden_dim, output_dim, rng, optimizer=ADAM):
    """
    Build a network with weights and biases uniform in +-1/sqrt(fan_in).

    Args:
        input_dim, hidden_dim, output_dim: Layer sizes
        rng: numpy Generator used for initialization
        optimizer: "adam" or "sgd"

    Returns:
        MlpNetwork with fresh optimizer state
    """
    if min(input_dim, hidden_dim, output_dim) < 1:
        raise RejectedInputError(
            f"layer sizes must be positive, got {input_dim}x{hidden_dim}x{output_dim}"
        )
    if optimizer not in OPTIMIZERS:
        raise RejectedInputError(f"unknown optimizer '{optimizer}' (expected one of {OPTIMIZERS})")

    bound1 = 1.0 / np.sqrt(input_dim)
    bound2 = 1.0 / np.sqrt(hidden_dim)
    return MlpNetwork(
        w1=rng.uniform(-bound1, bound1, size=(hidden_dim, input_dim)),
        b1=rng.uniform(-bound1, bound1, size=hidden_dim),
        w2=rng.uniform(-bound2, bound2, size=(output_dim, hidden_dim)),
        b2=rng.uniform(-bound2, bound2, size=output_dim),
        optimizer=optimizer,
    )


def _as_batch(net, inputs):
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise RejectedInputError(
            f"input of shape {np.shape(inputs)} does not match input_dim {net.input_dim}"
        )
    return x, single


def _forward_cache(net, x):
    z1 = x @ net.w1.T + net.b1
    a1 = np.maximum(z1, 0.0)
    out = a1 @ net.w2.T + net.b2
    return z1, a1, out


def mlp_forward(net, inputs):
    """
    Evaluate the network on one input vector or a batch of row vectors.

    Pure: parameters and optimizer state are not touched.
    """
    x, single = _as_batch(net, inputs)
    _, _, out = _forward_cache(net, x)
    return out[0] if single else out


def parameter_gradients(net, inputs, output_grads):
    """
    Backpropagate output gradients to parameter gradients, averaged over the batch.

    Args:
        net: MlpNetwork
        inputs: (batch, input_dim) or a single vector
        output_grads: dLoss/dOutput with matching leading dimension

    Returns:
        Dict mapping parameter name to gradient array
    """
    x, _ = _as_batch(net, inputs)
    g = np.asarray(output_grads, dtype=np.float64).reshape(x.shape[0], -1)
    if g.shape[1] != net.output_dim:
        raise RejectedInputError(
            f"output gradients of shape {np.shape(output_grads)} do not match output_dim {net.output_dim}"
        )
    if x.shape[0] == 0:
        raise RejectedInputError("empty batch")

    n = x.shape[0]
    z1, a1, _ = _forward_cache(net, x)
    dz1 = (g @ net.w2) * (z1 > 0.0)
    return {
        "w1": dz1.T @ x / n,
        "b1": dz1.mean(axis=0),
        "w2": g.T @ a1 / n,
        "b2": g.mean(axis=0),
    }


def train_step(net, inputs, output_grads, learning_rate):
    """
    Apply one optimizer update from per-sample output gradients.

    The network is updated in place and returned. New parameter values are
    checked before they are committed, so a failed step leaves the network
    as it was.
    """
    if learning_rate <= 0:
        raise RejectedInputError(f"learning rate must be positive, got {learning_rate}")

    grads = parameter_gradients(net, inputs, output_grads)
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"non-finite gradient for {name}")

    step = net.update_count + 1
    updated = {}
    moments = {}
    for name, grad in grads.items():
        param = getattr(net, name)
        if net.optimizer == SGD:
            updated[name] = param - learning_rate * grad
            continue
        m = net.first_moments.get(name, np.zeros_like(param))
        v = net.second_moments.get(name, np.zeros_like(param))
        m = net.beta1 * m + (1.0 - net.beta1) * grad
        v = net.beta2 * v + (1.0 - net.beta2) * grad * grad
        m_hat = m / (1.0 - net.beta1 ** step)
        v_hat = v / (1.0 - net.beta2 ** step)
        updated[name] = param - learning_rate * m_hat / (np.sqrt(v_hat) + net.adam_eps)
        moments[name] = (m, v)

    for name, value in updated.items():
        if not np.all(np.isfinite(value)):
            raise TrainingError(f"update produced non-finite values in {name}")

    for name, value in updated.items():
        getattr(net, name)[...] = value
    for name, (m, v) in moments.items():
        net.first_moments[name] = m
        net.second_moments[name] = v
    net.update_count = step
    return net


def huber_loss(prediction, target, delta=1.0):
    """
    Summed elementwise Huber loss.

    The gradient is the residual clipped to [-delta, delta].
    """
    if delta <= 0:
        raise RejectedInputError(f"huber delta must be positive, got {delta}")
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise RejectedInputError(f"prediction shape {p.shape} != target shape {t.shape}")

    r = p - t
    abs_r = np.abs(r)
    per_element = np.where(abs_r <= delta, 0.5 * r * r, delta * (abs_r - 0.5 * delta))
    return LossValue(float(per_element.sum()), np.clip(r, -delta, delta))


def softmax(logits, axis=-1):
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits, true_class):
    """-log softmax(logits)[true_class], with gradient softmax - one_hot."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise RejectedInputError(f"logits must be a vector of length >= 2, got shape {z.shape}")
    if isinstance(true_class, (bool, np.bool_)) or not 0 <= int(true_class) < z.size or int(true_class) != true_class:
        raise RejectedInputError(f"class {true_class} outside [0, {z.size})")

    k = int(true_class)
    shifted = z - z.max()
    log_norm = np.log(np.exp(shifted).sum())
    value = float(log_norm - shifted[k])
    grad = softmax(z)
    grad[k] -= 1.0
    return LossValue(value, grad)


@dataclass
class LossSpec:
    """
    Loss attached to a network output, used by gradient_check.

    kind: "huber" (target is a vector), "cross_entropy" (target holds one
    class per consecutive group of `group` logits) or "zero".
    """
    kind: str
    target: Optional[np.ndarray] = None
    delta: float = 1.0
    group: int = 3

    def evaluate(self, output):
        out = np.asarray(output, dtype=np.float64)
        if self.kind == "huber":
            return huber_loss(out, self.target, self.delta)
        if self.kind == "cross_entropy":
            groups = out.reshape(-1, self.group)
            classes = np.asarray(self.target).reshape(-1)
            if classes.size != groups.shape[0]:
                raise RejectedInputError(
                    f"{classes.size} classes for {groups.shape[0]} logit groups"
                )
            total = 0.0
            grads = []
            for logits, cls in zip(groups, classes):
                loss = softmax_cross_entropy(logits, int(cls))
                total += loss.value
                grads.append(loss.gradient_wrt_output)
            return LossValue(total, np.concatenate(grads))
        if self.kind == "zero":
            return LossValue(0.0, np.zeros_like(out))
        raise RejectedInputError(f"unknown loss kind '{self.kind}'")


def gradient_check(net, input, loss_spec, epsilon=1e-5):
    """
    Compare backprop gradients against central finite differences.

    Args:
        net: MlpNetwork (left untouched; a private copy is perturbed)
        input: single input vector
        loss_spec: LossSpec evaluated on the network output
        epsilon: perturbation size in [1e-6, 1e-3]

    Returns:
        Maximum relative error |a - n| / max(|a| + |n|, 1e-6) over all parameters
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise RejectedInputError(f"epsilon {epsilon} outside [1e-6, 1e-3]")

    scratch = copy.deepcopy(net)
    x = np.asarray(input, dtype=np.float64)
    loss = loss_spec.evaluate(mlp_forward(scratch, x))
    analytic = parameter_gradients(scratch, x, loss.gradient_wrt_output)

    worst = 0.0
    for name in PARAMETER_NAMES:
        param = getattr(scratch, name)
        flat = param.reshape(-1)
        grad = analytic[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + epsilon
            plus = loss_spec.evaluate(mlp_forward(scratch, x)).value
            flat[i] = original - epsilon
            minus = loss_spec.evaluate(mlp_forward(scratch, x)).value
            flat[i] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            denom = max(abs(grad[i]) + abs(numeric), 1e-6)
            worst = max(worst, abs(grad[i] - numeric) / denom)
    return worst


def snapshot(net):
    """Read-only deep copy of the parameters (optimizer state dropped)."""
    params = {}
    for name in PARAMETER_NAMES:
        arr = getattr(net, name).copy()
        arr.flags.writeable = False
        params[name] = arr
    return MlpNetwork(optimizer=net.optimizer, **params)


def copy_parameters(source, target):
    """Overwrite target's parameters with source's; dimensions must agree."""
    for name in PARAMETER_NAMES:
        src = getattr(source, name)
        dst = getattr(target, name)
        if src.shape != dst.shape:
            raise RejectedInputError(f"{name} shape {src.shape} != {dst.shape}")
        dst[...] = src
    return target


def save_network(net, path):
    """
    Write parameters as FBRLNN1: magic, three little-endian uint64 dims,
    then w1, b1, w2, b2 row-major as little-endian float64.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dims = np.array([net.input_dim, net.hidden_dim, net.output_dim], dtype="<u8")
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(dims.tobytes())
        for name in PARAMETER_NAMES:
            fh.write(np.ascontiguousarray(getattr(net, name), dtype="<f8").tobytes())
    logger.debug("saved %dx%dx%d network to %s", net.input_dim, net.hidden_dim, net.output_dim, path)


def load_network(path, optimizer=ADAM):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    data = path.read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise RejectedInputError(f"{path.name} is not an FBRLNN1 checkpoint")

    offset = len(CHECKPOINT_MAGIC)
    input_dim, hidden_dim, output_dim = (int(d) for d in np.frombuffer(data, dtype="<u8", count=3, offset=offset))
    offset += 3 * 8
    shapes = {
        "w1": (hidden_dim, input_dim),
        "b1": (hidden_dim,),
        "w2": (output_dim, hidden_dim),
        "b2": (output_dim,),
    }
    expected = offset + 8 * sum(int(np.prod(s)) for s in shapes.values())
    if len(data) != expected:
        raise RejectedInputError(f"{path.name}: expected {expected} bytes, found {len(data)}")

    params = {}
    for name in PARAMETER_NAMES:
        count = int(np.prod(shapes[name]))
        values = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        params[name] = values.astype(np.float64).reshape(shapes[name])
        offset += 8 * count
    return MlpNetwork(optimizer=optimizer, **params)
