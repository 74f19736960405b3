"""Small random instances of every tape op, shared by the gradient-check tests."""

import numpy as np

from stridedpose import numerics as nx
from stridedpose.numerics import RngStream


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, margin * np.sign(x + 1e-300), x)


def _case_linear(rng):
    return {"x": rng.normal(size=(3, 4)), "w": rng.normal(size=(4, 2)), "b": rng.normal(size=2)}, \
        lambda p: nx.linear(p["x"], p["w"], p["b"])


def _case_conv(rng):
    T, K, s = rng.integers(1, 9), int(rng.choice([1, 3, 5])), int(rng.integers(1, 4))
    return {"x": rng.normal(size=(2, T, 3)), "k": rng.normal(size=(K, 3, 2)), "b": rng.normal(size=2)}, \
        lambda p: nx.conv1d_strided(p["x"], p["k"], p["b"], s)


def _case_maxpool(rng):
    # Distinct values keep argmax away from ties.
    T, s = int(rng.integers(1, 10)), int(rng.integers(1, 4))
    x = rng.permutation(2 * T * 3).reshape(2, T, 3) * 0.1 + rng.uniform(0, 0.01, size=(2, T, 3))
    return {"x": x}, lambda p: nx.maxpool1d(p["x"], s)


def _case_softmax(rng):
    axis = int(rng.integers(0, 2))
    return {"x": rng.normal(size=(3, 5))}, lambda p: nx.softmax(p["x"], axis=axis)


def _case_relu(rng):
    return {"x": _away_from_zero(rng, (4, 3))}, lambda p: nx.relu(p["x"])


def _case_layer_norm(rng):
    return {"x": rng.normal(size=(3, 6)), "g": rng.normal(size=6), "s": rng.normal(size=6)}, \
        lambda p: nx.layer_norm(p["x"], p["g"], p["s"])


def _case_batch_norm(rng):
    mode = ["train", "eval"][int(rng.integers(0, 2))]
    stats = {"running_mean": rng.normal(size=4), "running_var": rng.uniform(0.5, 2, size=4), "num_updates": np.ones(1)}

    def f(p):
        local = {k: v.copy() for k, v in stats.items()}
        return nx.batch_norm_1d(p["x"], p["g"], p["s"], local, mode=mode)

    return {"x": rng.normal(size=(2, 5, 4)), "g": rng.normal(size=4), "s": rng.normal(size=4)}, f


def _case_dropout(rng):
    seed = int(rng.integers(0, 1000))
    return {"x": rng.normal(size=(5, 4))}, lambda p: nx.dropout(p["x"], 0.3, RngStream(seed))


def _case_matmul(rng):
    return {"a": rng.normal(size=(2, 3, 4)), "b": rng.normal(size=(2, 4, 5))}, lambda p: nx.matmul(p["a"], p["b"])


def _case_l2(rng):
    return {"x": rng.normal(size=(4, 3)) + 0.5}, lambda p: nx.l2_norm(p["x"])


def _case_structural(rng):
    def f(p):
        y = nx.transpose(nx.reshape(p["x"], (2, 3, 2)), (1, 0, 2))
        return nx.take(y, (slice(None), 1)) * p["x"][0, :2] + nx.sub(2.0, y[0, 0])

    return {"x": rng.normal(size=(2, 6))}, f


OP_CASES = {
    "linear": _case_linear,
    "conv1d_strided": _case_conv,
    "maxpool1d": _case_maxpool,
    "softmax": _case_softmax,
    "relu": _case_relu,
    "layer_norm": _case_layer_norm,
    "batch_norm_1d": _case_batch_norm,
    "dropout": _case_dropout,
    "matmul": _case_matmul,
    "l2_norm": _case_l2,
    "structural": _case_structural,
}
