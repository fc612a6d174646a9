import numpy as np
import pytest

from tripletflow.evaluation import (
    DegenerateBaselineError,
    GroundTruthFlow,
    NoOverlapError,
    aee,
    fwl,
    iwe,
    scale_flow_to_displacement,
    velocity_histogram,
    warp_events,
)
from tripletflow.events import EventBatch
from tripletflow.postprocess import DenseFlow


def dense(value, shape=(4, 6), valid=None):
    valid = np.ones(shape, dtype=bool) if valid is None else valid
    return DenseFlow(np.broadcast_to(np.asarray(value, float), shape + (2,)).copy(), valid)


def test_scale():
    d = scale_flow_to_displacement(dense((200.0, 0.0)), 0.0222)
    assert d.flow[0, 0, 0] == pytest.approx(4.44)
    d4 = scale_flow_to_displacement(dense((200.0, 0.0)), 4 * 0.0222)
    np.testing.assert_allclose(d4.flow, 4 * d.flow)
    m = np.ones((4, 6), bool)
    m[1, 1] = False
    assert not scale_flow_to_displacement(dense((1, 1), valid=m), 1.0).valid[1, 1]
    with pytest.raises(ValueError):
        scale_flow_to_displacement(dense((1, 1)), 0.0)


def test_aee_identity_and_threshold():
    gt = GroundTruthFlow(dense((1.0, 2.0)))
    r = aee(dense((1.0, 2.0)), gt)
    assert (r.aee, r.outlier_pct) == (0.0, 0.0)
    r = aee(dense((4.0, 2.0)), gt)
    assert r.aee == pytest.approx(3.0)
    assert r.outlier_pct == 0.0


def test_aee_two_populations():
    gt = dense((1.0, 1.0))
    pred = dense((1.0, 1.0))
    pred.flow[:2] += (5.0, 0.0)  # half the 4 x 6 pixels
    r = aee(pred, gt)
    assert r.aee == pytest.approx(2.5)
    assert r.outlier_pct == pytest.approx(50.0)


def test_aee_evaluated_set_and_coverage():
    pv = np.zeros((4, 6), bool)
    pv[0, :3] = True
    r = aee(dense((0, 0), valid=pv), dense((0, 0)))
    assert r.n_evaluated == 3
    assert r.coverage == pytest.approx(3 / 24)
    with pytest.raises(NoOverlapError):
        aee(dense((0, 0), valid=np.zeros((4, 6), bool)), dense((0, 0)))


def test_aee_symmetric():
    rng = np.random.default_rng(1)
    a = DenseFlow(rng.normal(size=(5, 5, 2)), np.ones((5, 5), bool))
    b = DenseFlow(rng.normal(size=(5, 5, 2)), np.ones((5, 5), bool))
    assert aee(a, b).aee == aee(b, a).aee


def test_gt_mask_excludes_nonfinite():
    f = np.zeros((2, 2, 2))
    f[0, 0] = np.inf
    gt = GroundTruthFlow(DenseFlow(f, np.ones((2, 2), bool)))
    assert not gt.displacement.valid[0, 0]


def one_event(t, x, y):
    return EventBatch([t], [x], [y], [1], (32, 32))


def test_warp():
    b = one_event(0, 12, 10)
    np.testing.assert_allclose(warp_events(b, np.array([[200.0, 0.0]]), 10_000), [[14.0, 10.0]])
    np.testing.assert_allclose(warp_events(b, np.array([[200.0, 0.0]]), 0), [[12.0, 10.0]])
    np.testing.assert_allclose(warp_events(b, np.array([[np.nan, np.nan]]), 5e5), [[12.0, 10.0]])


def test_iwe_lattice_and_split():
    img = iwe(np.array([[3.0, 2.0]]), (8, 8))
    assert img[2, 3] == 1.0 and img.sum() == 1.0
    img = iwe(np.array([[3.5, 2.0]]), (8, 8))
    assert img[2, 3] == 0.5 and img[2, 4] == 0.5


def test_iwe_mass_conservation():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-3, 11, size=(1000, 2))
    img = iwe(pts, (8, 8))
    inside = np.all((pts >= 0) & (pts <= 7), axis=1).sum()
    assert img.sum() == pytest.approx(inside, rel=1e-9)


def test_fwl_zero_flow_is_one():
    rng = np.random.default_rng(4)
    n = 300
    b = EventBatch(np.sort(rng.integers(0, 10**6, n)), rng.integers(0, 20, n), rng.integers(0, 20, n),
                   rng.choice([-1, 1], n), (20, 20))
    assert fwl(b, np.zeros((n, 2))) == 1.0
    assert fwl(b, np.full((n, 2), np.nan)) == 1.0


def test_fwl_degenerate():
    b = EventBatch([0, 1, 2, 3], [0, 1, 0, 1], [0, 0, 1, 1], [1] * 4, (2, 2))
    with pytest.raises(DegenerateBaselineError):
        fwl(b, np.zeros((4, 2)))


def test_histogram_directions():
    v = np.array([[200.0, 0.0], [100.0, 0.0], [0.0, 0.0], [-50.0, 50.0], [10.0, 3.0]])
    h = velocity_histogram(v, max_speed=400)
    assert h.direction_counts["E"] == 2
    assert h.direction_counts["zero"] == 1
    assert h.direction_counts["SW"] == 1
    assert h.direction_counts["other"] == 1
    assert sum(h.direction_counts.values()) == 5
    assert h.magnitude_counts["zero"][0] == 1
    csv = h.to_csv().splitlines()
    assert csv[0].startswith("direction_bin,magnitude_bin")
    assert len(csv) == 1 + 10 * 20


def test_histogram_empty():
    h = velocity_histogram(np.zeros((0, 2)))
    assert sum(h.direction_counts.values()) == 0
