from __future__ import annotations

import numpy as np


class AMSGrad:
    """Adam with a running maximum of the second-moment estimate.

    Bias correction follows the common formulation: the step is
    ``lr / (1 - b1^t) * m / (sqrt(v_max) / sqrt(1 - b2^t) + eps)``.
    """

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.v_max = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, p in self.params.items():
            g = grads[k]
            m, v, vmax = self.m[k], self.v[k], self.v_max[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            np.maximum(vmax, v, out=vmax)
            p -= (self.lr / c1) * m / (np.sqrt(vmax) / np.sqrt(c2) + self.eps)
