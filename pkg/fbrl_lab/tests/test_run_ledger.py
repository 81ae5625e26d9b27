import pytest

from fbrl_lab.config import DDQN, FBRL, default_experiment_config
from fbrl_lab.environments import GRIDWORLD, HANOI
from fbrl_lab.run_ledger import (FINISHED, RUNNING, config_fingerprint, init_ledger, open_ledger,
                                 record_run_finish, record_run_start, query_runs)


@pytest.fixture
def ledger(tmp_path):
    db = init_ledger(str(tmp_path / "runs.db"))
    yield db
    db.close()


def test_fingerprint_tracks_config():
    a = default_experiment_config(GRIDWORLD, 5, FBRL)
    b = default_experiment_config(GRIDWORLD, 5, FBRL)
    assert config_fingerprint(a) == config_fingerprint(b)
    b.seed = 1
    assert config_fingerprint(a) != config_fingerprint(b)
    assert len(config_fingerprint(a)) == 16


def test_start_then_finish(ledger):
    config = default_experiment_config(HANOI, 2, DDQN)
    run_id = record_run_start(ledger, config, "results/h2")
    (row,) = query_runs(ledger)
    assert row[0] == run_id and row[6] == RUNNING and row[7] is None

    record_run_finish(ledger, run_id, FINISHED, 0.42)
    (row,) = query_runs(ledger)
    assert row[1:7] == (DDQN, HANOI, 2, 0, 10, FINISHED)
    assert row[7] == pytest.approx(0.42)
    assert row[8] == "results/h2"


def test_filters(ledger):
    record_run_start(ledger, default_experiment_config(GRIDWORLD, 5, FBRL), "g")
    record_run_start(ledger, default_experiment_config(GRIDWORLD, 5, DDQN), "g2")
    record_run_start(ledger, default_experiment_config(HANOI, 3, FBRL), "h")
    assert len(query_runs(ledger)) == 3
    assert [r[8] for r in query_runs(ledger, environment=GRIDWORLD)] == ["g", "g2"]
    assert [r[8] for r in query_runs(ledger, method=FBRL)] == ["g", "h"]
    assert [r[8] for r in query_runs(ledger, environment=HANOI, method=DDQN)] == []


def test_finish_unknown_run(ledger):
    with pytest.raises(ValueError):
        record_run_finish(ledger, "nope", FINISHED)


def test_open_requires_existing_ledger(tmp_path):
    with pytest.raises(FileNotFoundError):
        open_ledger(tmp_path / "missing.db")
    init_ledger(str(tmp_path / "present.db")).close()
    open_ledger(tmp_path / "present.db").close()
