from __future__ import annotations

from typing import Callable

import numpy as np

from .rng import RngStream
from .tensor import Tensor, backward, no_grad


def grad_check(
    f: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, np.ndarray],
    eps: float = 1e-5,
    max_coords: int | None = None,
    rng: RngStream | None = None,
) -> float:
    """Max relative error between tape gradients and central differences.

    The error per coordinate is ``|a - n| / max(1, |a|, |n|)``. ``f`` must be
    deterministic: any dropout inside it has to draw from a stream it
    rebuilds on every call. With ``max_coords`` only a random subset of
    coordinates per parameter is checked.

    Non-smooth points (ReLU at 0, max-pool ties, a zero-length norm) are not
    handled; callers sample inputs away from them.
    """
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    tensors = {k: Tensor(v.copy(), requires_grad=True, name=k) for k, v in base.items()}
    analytic = backward(f(tensors), tensors)

    def evaluate(k: str, flat_index: int, delta: float) -> float:
        trial = {name: Tensor(arr) for name, arr in base.items()}
        arr = base[k].copy()
        arr.reshape(-1)[flat_index] += delta
        trial[k] = Tensor(arr)
        with no_grad():
            return float(f(trial).data)

    worst = 0.0
    for k, arr in base.items():
        n = arr.size
        if max_coords is not None and n > max_coords:
            picks = (rng or RngStream(0)).permutation(n)[:max_coords]
        else:
            picks = range(n)
        ga = analytic[k].reshape(-1)
        for i in picks:
            num = (evaluate(k, i, eps) - evaluate(k, i, -eps)) / (2 * eps)
            a = ga[i]
            worst = max(worst, abs(a - num) / max(1.0, abs(a), abs(num)))
    return worst
