import threading

import numpy as np
import pytest
from scipy.stats import chisquare

from fbrl_lab.errors import InsufficientDataError
from fbrl_lab.replay_buffer import ReplayBuffer, Transition, stack_transitions


def transition(i, imagined=False):
    return Transition(state=np.array([float(i), 0.0]), action=i % 4, reward=-0.01,
                      next_state=np.array([float(i + 1), 0.0]), terminal=False, imagined=imagined)


def test_single_append():
    buffer = ReplayBuffer(10)
    buffer.append(transition(0))
    assert len(buffer) == 1
    assert buffer.insertion_counter == 1


def test_fifo_eviction():
    buffer = ReplayBuffer(3)
    for i in range(4):
        buffer.append(transition(i))
    ids = [t.state[0] for t in buffer.contents()]
    assert len(buffer) == 3
    assert ids == [1.0, 2.0, 3.0]


def test_capacity_10000():
    buffer = ReplayBuffer(10000)
    buffer.extend(transition(i) for i in range(10000))
    assert len(buffer) == 10000
    buffer.append(transition(10000))
    assert len(buffer) == 10000
    assert buffer.contents()[0].state[0] == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_randomized_eviction_order(seed):
    rng = np.random.default_rng(seed)
    capacity = int(rng.integers(1, 50))
    total = int(rng.integers(0, 200))
    buffer = ReplayBuffer(capacity)
    for i in range(total):
        buffer.append(transition(i))
    expected = list(range(max(0, total - capacity), total))
    assert [int(t.state[0]) for t in buffer.contents()] == expected
    assert len(buffer) <= capacity


def test_sample_single_entry():
    buffer = ReplayBuffer(5)
    only = transition(7)
    buffer.append(only)
    assert buffer.sample(1, np.random.default_rng(0))[0] is only


def test_sample_batch_from_full_buffer():
    buffer = ReplayBuffer(10000)
    buffer.extend(transition(i) for i in range(10000))
    before = buffer.contents()
    batch = buffer.sample(100, np.random.default_rng(1))
    assert len(batch) == 100
    stored = {id(t) for t in before}
    assert all(id(t) in stored for t in batch)
    assert [id(t) for t in buffer.contents()] == [id(t) for t in before]


def test_sample_underfull_raises():
    buffer = ReplayBuffer(10)
    buffer.append(transition(0))
    with pytest.raises(InsufficientDataError):
        buffer.sample(2, np.random.default_rng(0))


def test_sampling_is_uniform():
    buffer = ReplayBuffer(10)
    buffer.extend(transition(i) for i in range(10))
    rng = np.random.default_rng(123)
    counts = np.zeros(10)
    for _ in range(100000):
        counts[int(buffer.sample(1, rng)[0].state[0])] += 1
    assert chisquare(counts).pvalue > 0.001


def test_imagined_counter_and_mixed_sampling():
    buffer = ReplayBuffer(60)
    buffer.extend([transition(i, imagined=i % 3 != 0) for i in range(60)])
    assert len(buffer) == 60
    assert buffer.imagined_counter == 40
    batch = stack_transitions(buffer.sample(50, np.random.default_rng(0)))
    assert batch.imagined.any() and not batch.imagined.all()


def test_underfull_mixed_buffer_refuses_large_batch():
    buffer = ReplayBuffer(10)
    buffer.extend([transition(0), transition(1, imagined=True), transition(2, imagined=True)])
    assert buffer.imagined_counter == 2
    with pytest.raises(InsufficientDataError):
        buffer.sample(50, np.random.default_rng(0))


def test_stack_transitions_shapes():
    batch = stack_transitions([transition(i) for i in range(4)])
    assert batch.states.shape == (4, 2)
    assert batch.actions.tolist() == [0, 1, 2, 3]
    assert len(batch) == 4


def test_concurrent_append_and_sample():
    buffer = ReplayBuffer(500)
    buffer.extend(transition(i) for i in range(100))
    errors = []
    per_writer = 2000

    def writer(offset):
        for i in range(per_writer):
            buffer.append(transition(offset + i))

    def reader(seed):
        rng = np.random.default_rng(seed)
        try:
            for _ in range(500):
                batch = buffer.sample(32, rng)
                assert len(batch) == 32
                assert len(buffer) <= 500
        except Exception as e:
            errors.append(e)

    threads = [threading.Thread(target=writer, args=((k + 1) * 100000,)) for k in range(4)]
    threads += [threading.Thread(target=reader, args=(k,)) for k in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert not errors
    assert buffer.insertion_counter == 100 + 4 * per_writer
    assert len(buffer) == 500
    # each writer's surviving entries keep their insertion order
    survivors = [int(t.state[0]) for t in buffer.contents()]
    for k in range(4):
        own = [s for s in survivors if (k + 1) * 100000 <= s < (k + 2) * 100000]
        assert own == sorted(own)
