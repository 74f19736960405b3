import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from stridedpose import numerics as nx
from stridedpose.metrics import (
    MetricReport,
    mpjpe,
    mpjve,
    p_mpjpe,
    procrustes_align,
    sequence_loss,
    single_frame_loss,
    total_loss,
)
from stridedpose.numerics import ConfigError, DimensionError, Tensor


def loss_oracle(x, y):
    total = 0.0
    for idx in np.ndindex(x.shape[:-1]):
        total += np.sqrt(sum((x[idx][c] - y[idx][c]) ** 2 for c in range(3)))
    return total


def test_sequence_loss_examples():
    Y = np.zeros((4, 17, 3))
    assert float(sequence_loss(Y, Y).data) == 0.0
    X = Y.copy()
    X[2, 5] = (3, 4, 0)
    assert float(sequence_loss(X, Y).data) == 5.0


def test_single_frame_loss_example():
    Y = np.zeros((17, 3))
    X = Y.copy()
    X[0] = (0, 0, 1)
    X[1] = (0, 2, 0)
    assert float(single_frame_loss(X, Y).data) == 3.0


@pytest.mark.parametrize("seed", range(5))
def test_losses_match_oracle(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(2, 9, 17, 3))
    assert abs(float(sequence_loss(X, Y).data) - loss_oracle(X, Y)) <= 1e-12 * loss_oracle(X, Y)
    assert abs(float(single_frame_loss(X[0], Y[0]).data) - loss_oracle(X[0], Y[0])) <= 1e-12


def test_loss_shape_mismatch():
    with pytest.raises(DimensionError):
        sequence_loss(np.zeros((3, 17, 3)), np.zeros((4, 17, 3)))


def test_sequence_loss_gradient():
    rng = np.random.default_rng(11)
    Y = rng.normal(size=(5, 4, 3))
    X = Y + rng.normal(size=Y.shape)
    assert nx.grad_check(lambda t: sequence_loss(t["x"], Y), {"x": X}) <= 1e-5


def test_total_loss_weights_and_modes():
    Lf, Ls = Tensor(np.array(2.0)), Tensor(np.array(3.0))
    assert float(total_loss(Lf, Ls, 1, 1).data) == 5.0
    assert float(total_loss(Lf, Ls, 1, 1, "single").data) == 3.0
    assert float(total_loss(Lf, Ls, 1, 1, "full").data) == 2.0
    assert float(total_loss(Lf, Ls, 0.5, 2.0).data) == 7.0
    with pytest.raises(ConfigError):
        total_loss(Lf, Ls, 0, 0)
    with pytest.raises(ConfigError):
        total_loss(Lf, Ls, -1, 1)


def mpjpe_oracle(p, g):
    errs = [np.sqrt(np.sum((p[idx] - g[idx]) ** 2)) for idx in np.ndindex(p.shape[:-1])]
    return sum(errs) / len(errs)


def test_mpjpe_examples():
    g = np.random.default_rng(0).normal(size=(6, 17, 3))
    assert mpjpe(g, g) == 0.0
    assert mpjpe(g + np.array([0, 3, 4]), g) == pytest.approx(5.0, abs=1e-12)
    p = g + np.random.default_rng(1).normal(size=g.shape)
    assert mpjpe(p, g) == pytest.approx(mpjpe_oracle(p, g), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_p_mpjpe_similarity_invariance(seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(17, 3)) * 300
    R = Rotation.random(random_state=seed).as_matrix()
    p = 2.0 * g @ R.T + rng.normal(size=3) * 500
    assert p_mpjpe(p, g) <= 1e-9
    # a common rigid motion of both inputs leaves the score unchanged
    q = g + rng.normal(size=g.shape) * 20
    R2 = Rotation.random(random_state=seed + 100).as_matrix()
    t = rng.normal(size=3)
    assert p_mpjpe(q @ R2.T + t, g @ R2.T + t) == pytest.approx(p_mpjpe(q, g), abs=1e-9)


def test_p_mpjpe_rejects_reflection():
    g = np.random.default_rng(3).normal(size=(17, 3))
    mirrored = g * np.array([-1, 1, 1])
    assert p_mpjpe(mirrored, g) > 1e-3


def test_p_mpjpe_never_exceeds_mpjpe():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        p, g = rng.normal(size=(2, 17, 3))
        assert p_mpjpe(p, g) <= mpjpe(p, g) + 1e-9


def test_procrustes_degenerate_frame_falls_back(caplog):
    g = np.random.default_rng(5).normal(size=(17, 3))
    p = np.ones((17, 3))
    with caplog.at_level("WARNING"):
        out = procrustes_align(p, g)
    assert "degenerate" in caplog.text
    np.testing.assert_allclose(out, np.broadcast_to(g.mean(0), g.shape))


def test_mpjve():
    rng = np.random.default_rng(6)
    g = rng.normal(size=(20, 17, 3))
    assert mpjve(g + rng.normal(size=3), g) == pytest.approx(0.0, abs=1e-12)
    p = g + rng.normal(size=g.shape)
    assert mpjve(p, g) == pytest.approx(mpjpe_oracle(p[1:] - p[:-1], g[1:] - g[:-1]), abs=1e-12)
    with pytest.raises(DimensionError):
        mpjve(g[:1], g[:1])


def test_report_csv_layout():
    rep = MetricReport(10.0, 8.0, 1.5, {"walk": {"mpjpe": 9.0, "p_mpjpe": 7.0, "mpjve": 1.0}})
    rows = rep.to_csv().strip().split("\n")
    assert rows[0] == "action,mpjpe,p_mpjpe,mpjve"
    assert rows[1].startswith("walk,9.0")
    assert rows[-1].startswith("Avg.,10.0")
