import numpy as np

from tripletflow.events import EventBatch
from tripletflow.matcher import MatcherParams, process_batch
from tripletflow.oracle import brute_force_flow


def test_oracle_example_a(example_a):
    r = brute_force_flow(example_a)
    assert r.records[2].flow == (200.0, 0.0)
    assert r.triplet_set() == {(2, 1, 0)}


def test_oracle_random_500():
    rng = np.random.default_rng(7)
    n = 500
    b = EventBatch(np.sort(rng.integers(0, 400_000, n)), rng.integers(0, 6, n), rng.integers(0, 6, n),
                   rng.choice([-1, 1], n), (6, 6))
    fast = process_batch(b, collect_triplets=True)
    ref = brute_force_flow(b)
    assert len(ref.triplets) > 100
    assert fast.triplet_set() == ref.triplet_set()


def test_oracle_retention_one():
    # clean staircase: with R=1 only the previous event is searchable, but its
    # own neighbourhood is retained, so consecutive triplets still form
    ev = [(k * 4000, k % 5, 0, 1) for k in range(10)]
    b = EventBatch(*zip(*ev), resolution=(5, 1))
    for r in (1, 2, 10):
        p = MatcherParams(retention=r)
        assert process_batch(b, p, collect_triplets=True).triplet_set() == brute_force_flow(b, p).triplet_set()
    assert {t.k for t in brute_force_flow(b, MatcherParams(retention=1)).triplets} == {2, 3, 4, 7, 8, 9}

    # a distractor between i and k pushes i out of a retention-1 window
    ev = [(0, 10, 0, 1), (4000, 11, 0, 1), (4001, 0, 0, 1), (8000, 12, 0, 1)]
    b = EventBatch(*zip(*ev), resolution=(13, 1))
    assert brute_force_flow(b, MatcherParams(retention=1)).triplets == []
    assert brute_force_flow(b, MatcherParams(retention=2)).triplet_set() == {(3, 1, 0)}
    assert process_batch(b, MatcherParams(retention=1), collect_triplets=True).triplets == []
