import numpy as np

from curres.replicas import run_replicas, spawn_generators, worker_count


def draw(i, rng):
    return (i, rng.random())


def test_order_and_independence_of_workers():
    a = run_replicas(draw, 16, seed=3, workers=1)
    b = run_replicas(draw, 16, seed=3, workers=4)
    assert a == b and [i for i, _ in a] == list(range(16))
    assert len({v for _, v in a}) == 16


def test_streams_depend_on_seed():
    x = spawn_generators(1, 2)[0].random()
    y = spawn_generators(2, 2)[0].random()
    assert x != y


def test_worker_env(monkeypatch):
    monkeypatch.setenv("CURRES_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CURRES_WORKERS", "0")
    assert worker_count() == 1
