"""Analytic and measured compute cost of the VTE / STE stacks.

Counting convention: one multiply-accumulate (MAC) is one FLOP. Only the
attention projections, the two attention products and the FFN / CFFN
matrix multiplies are counted; norms, softmax, biases and activations are
not.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import ModelConfig, count_trainable, forward, init_params
from .model.params import n_vte_layers
from .numerics import ConfigError, count_macs, no_grad


def _check_positive(**kwargs) -> None:
    for name, v in kwargs.items():
        if v < 1:
            raise ConfigError(f"{name} must be positive, got {v}")


def vte_layer_flops(t, d) -> int | Fraction:
    return 8 * t * d * d + 2 * t * t * d


def ste_layer_flops(t, d, s, k) -> Fraction:
    """One STE layer on a length-``t`` input with CFFN hidden width 2d."""
    return (6 + Fraction(2 * k, s)) * t * d * d + 2 * t * t * d


def flops_vte(N: int, T: int, D: int) -> int:
    _check_positive(N=N, T=T, D=D)
    return N * vte_layer_flops(T, D)


def _flops_ste_exact(N: int, T: int, D: int, S: int, K: int) -> Fraction:
    _check_positive(N=N, T=T, D=D, S=S, K=K)
    total = Fraction(0)
    for n in range(1, N + 1):
        shrink = Fraction(1, S ** (n - 1))
        total += (6 + Fraction(2 * K, S)) * shrink * T * D * D + 2 * shrink * shrink * T * T * D
    return total


def flops_ste(N: int, T: int, D: int, S: int, K: int) -> int:
    """STE stack cost with the input length divided by S at every layer; exact until the final rounding."""
    return round(_flops_ste_exact(N, T, D, S, K))


def compression_ratio(N: int, T: int, D: int, S: int, K: int) -> tuple[float, float]:
    """(alpha, beta) with beta = F_STE / F_VTE and alpha = 2 / (1 + beta)."""
    beta = _flops_ste_exact(N, T, D, S, K) / flops_vte(N, T, D)
    return float(2 / (1 + beta)), float(beta)


def beta_closed_form(T: int, D: int) -> float:
    """Closed-form beta for three layers, stride 3, kernel 3."""
    return float(Fraction(468 * D + 91 * T, 972 * D + 243 * T))


def count_params(config: ModelConfig) -> tuple[int, dict[str, int]]:
    return count_trainable(config)


def measure_macs(config: ModelConfig) -> dict[str, int]:
    """Instrumented MACs per encoder layer from one eval forward pass (batch 1).

    Keys are layer paths (``vte.0``, ``ste.2``, ``embed``, ``head_seq`` ...).
    """
    params = init_params(config, seed=0)
    # Stats marked as updated so eval mode does not warn.
    for k in params:
        if k.endswith("num_updates"):
            params[k][...] = 1
    P = np.zeros((1, config.frames, config.joints, 2))
    with no_grad(), count_macs() as counter:
        forward(config, params, P, mode="eval")
    per_layer: dict[str, int] = {}
    for scope, n in counter.counts.items():
        parts = scope.split(".")
        key = ".".join(parts[:2]) if parts[0] in ("vte", "ste") else parts[0]
        per_layer[key] = per_layer.get(key, 0) + n
    return per_layer


def analytic_layer_macs(config: ModelConfig) -> dict[str, int | Fraction | None]:
    """Per-layer closed-form MACs at the actual layer input lengths (None when d_ff != 2 d_model)."""
    out: dict[str, int | Fraction] = {}
    d, T = config.d_model, config.frames
    for i in range(n_vte_layers(config)):
        out[f"vte.{i}"] = vte_layer_flops(T, d) if config.d_ff == 2 * d else None
    if config.second_stack == "ste":
        lengths = config.ste_lengths()
        for n, s in enumerate(config.s_m):
            out[f"ste.{n}"] = ste_layer_flops(lengths[n], d, s, config.k_m) if config.d_ff == 2 * d and config.k_f == 1 else None
    return out


@dataclass
class ComplexityReport:
    N: int
    T: int
    D: int
    S: int
    K: int
    flops_vte: int
    flops_ste: int
    alpha: float
    beta: float
    beta_closed: float | None = None
    param_count: int | None = None
    measured: dict[str, int] = field(default_factory=dict)
    analytic: dict[str, float] = field(default_factory=dict)

    @classmethod
    def build(cls, N=3, T=27, D=256, S=3, K=3, config: ModelConfig | None = None, measure: bool = True):
        alpha, beta = compression_ratio(N, T, D, S, K)
        rep = cls(N, T, D, S, K, flops_vte(N, T, D), flops_ste(N, T, D, S, K), alpha, beta)
        if (N, S, K) == (3, 3, 3):
            rep.beta_closed = beta_closed_form(T, D)
        if config is not None:
            rep.param_count = count_params(config)[0]
            if measure:
                rep.measured = measure_macs(config)
                rep.analytic = {k: float(v) for k, v in analytic_layer_macs(config).items() if v is not None}
        return rep

    def to_text(self) -> str:
        lines = [
            "# cost unit: 1 MAC = 1 FLOP (attention projections, attention products, FFN/CFFN only)",
            f"N={self.N} T={self.T} D={self.D} S={self.S} K={self.K}",
            f"F_VTE  = {self.flops_vte:,} MACs",
            f"F_STE  = {self.flops_ste:,} MACs",
            f"beta   = {self.beta:.6f}",
        ]
        if self.beta_closed is not None:
            lines.append(f"beta (closed form, N=S=K=3) = {self.beta_closed:.6f}")
        lines.append(f"alpha  = {self.alpha:.6f}")
        if self.param_count is not None:
            lines.append(f"params = {self.param_count:,} (no refine module)")
        for k in sorted(self.measured, key=_layer_sort_key):
            ref = self.analytic.get(k)
            ref_txt = f"  analytic {ref:,.0f}" if ref is not None else ""
            lines.append(f"  {k:<12} measured {self.measured[k]:,}{ref_txt}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for name in ("N", "T", "D", "S", "K", "flops_vte", "flops_ste", "alpha", "beta", "beta_closed", "param_count"):
            w.writerow([name, getattr(self, name)])
        for k in sorted(self.measured, key=_layer_sort_key):
            w.writerow([f"measured.{k}", self.measured[k]])
            if k in self.analytic:
                w.writerow([f"analytic.{k}", self.analytic[k]])
        return buf.getvalue()


def _layer_sort_key(name: str):
    order = {"embed": 0, "vte": 1, "head_seq": 2, "ste": 3, "head_seq2": 4, "head_target": 5}
    parts = name.split(".")
    return order.get(parts[0], 9), int(parts[1]) if len(parts) > 1 else 0
