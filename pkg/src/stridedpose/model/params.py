"""Parameter layout and initialization.

Every learnable array lives in a flat map keyed by a dotted path such as
``vte.2.msa.wq``; the set of paths and their shapes depend only on the
``ModelConfig``. Batch-norm running statistics ride along in the same map
under ``*.running_mean`` / ``*.running_var`` / ``*.num_updates`` but are not
trainable and are excluded from parameter counts.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

from ..numerics import RngStream
from .config import ModelConfig

BUFFER_SUFFIXES = ("running_mean", "running_var", "num_updates")


def is_trainable(path: str) -> bool:
    return not path.endswith(BUFFER_SUFFIXES)


def _norm(prefix: str, d: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.gain": (d,), f"{prefix}.shift": (d,)}


def _batch_norm(prefix: str, d: int) -> dict[str, tuple[int, ...]]:
    return {
        **_norm(prefix, d),
        f"{prefix}.running_mean": (d,),
        f"{prefix}.running_var": (d,),
        f"{prefix}.num_updates": (1,),
    }


def _msa(prefix: str, d: int) -> dict[str, tuple[int, ...]]:
    out = {}
    for name in ("q", "k", "v", "o"):
        out[f"{prefix}.w{name}"] = (d, d)
        out[f"{prefix}.b{name}"] = (d,)
    return out


def _conv(prefix: str, k: int, din: int, dout: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.kernel": (k, din, dout), f"{prefix}.bias": (dout,)}


def _head(prefix: str, cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    return {**_batch_norm(f"{prefix}.bn", cfg.d_model), **_conv(f"{prefix}.conv", 1, cfg.d_model, 3 * cfg.joints)}


def n_vte_layers(cfg: ModelConfig) -> int:
    """VTE layers actually built; the full / full-to-full schemes swap the STE for VTE layers."""
    return cfg.n_vte + (cfg.n_ste if cfg.second_stack == "vte" else 0)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f = cfg.d_model, cfg.d_ff
    shapes: dict[str, tuple[int, ...]] = {}
    shapes.update(_conv("embed.conv", 1, 2 * cfg.joints, d))
    shapes.update(_batch_norm("embed.bn", d))
    shapes["pos.vte"] = (cfg.frames, d)
    for i in range(n_vte_layers(cfg)):
        p = f"vte.{i}"
        shapes.update(_norm(f"{p}.ln1", d))
        shapes.update(_msa(f"{p}.msa", d))
        shapes.update(_norm(f"{p}.ln2", d))
        shapes.update({f"{p}.ffn.w1": (d, f), f"{p}.ffn.b1": (f,), f"{p}.ffn.w2": (f, d), f"{p}.ffn.b2": (d,)})
    if cfg.second_stack == "ste":
        lengths = cfg.ste_lengths()
        for n in range(cfg.n_ste):
            p = f"ste.{n}"
            shapes[f"{p}.pos"] = (lengths[n], d)
            shapes.update(_norm(f"{p}.ln1", d))
            shapes.update(_msa(f"{p}.msa", d))
            shapes.update(_norm(f"{p}.ln2", d))
            shapes.update(_conv(f"{p}.cffn.conv1", cfg.k_f, d, f))
            shapes.update(_conv(f"{p}.cffn.conv2", cfg.k_m, f, d))
    if cfg.n_vte > 0:
        shapes.update(_head("head_seq", cfg))
    if cfg.scheme == "full-to-full":
        shapes.update(_head("head_seq2", cfg))
    if cfg.second_stack == "ste":
        shapes.update(_head("head_target", cfg))
    return shapes


def _fan_in(path: str, shapes: dict[str, tuple[int, ...]]) -> int:
    stem, leaf = path.rsplit(".", 1)
    if leaf == "kernel":
        k, din, _ = shapes[path]
        return k * din
    if leaf == "bias":
        k, din, _ = shapes[f"{stem}.kernel"]
        return k * din
    if leaf.startswith("w"):
        return shapes[path][0]
    # bq/bk/bv/bo, b1/b2 share the fan-in of their weight
    weight = f"{stem}.w{leaf[1:]}"
    return shapes[weight][0]


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Deterministic initialization; each path draws from its own stream.

    Dense and conv weights and biases: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    Norm gains 1, shifts 0. Position tables: N(0, 0.02^2).
    """
    shapes = param_shapes(cfg)
    params: dict[str, np.ndarray] = {}
    for path, shape in shapes.items():
        leaf = path.rsplit(".", 1)[1]
        rng = RngStream(seed, zlib.crc32(path.encode()))
        if leaf in ("gain", "running_var"):
            arr = np.ones(shape)
        elif leaf in ("shift", "running_mean", "num_updates"):
            arr = np.zeros(shape)
        elif path.startswith("pos.") or leaf == "pos":
            arr = rng.normal(shape, 0.02)
        else:
            bound = 1.0 / math.sqrt(_fan_in(path, shapes))
            arr = rng.uniform(shape, -bound, bound)
        params[path] = arr
    return params


def count_trainable(cfg: ModelConfig) -> tuple[int, dict[str, int]]:
    breakdown = {p: math.prod(s) for p, s in param_shapes(cfg).items() if is_trainable(p)}
    return sum(breakdown.values()), breakdown
