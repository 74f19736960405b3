"""Strided Transformer forward pass.

Activations are batched ``(B, L, d_model)``. Parameters are looked up in a
flat path map whose values may be plain arrays or leaf ``Tensor``s; batch
norm running statistics are read from (and, in train mode, written to) the
same map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .. import numerics as nx
from ..numerics import ConfigError, NumericError, RngStream, Tensor, mac_scope
from .config import ModelConfig
from .params import n_vte_layers

Params = Mapping[str, "Tensor | np.ndarray"]


@dataclass
class ForwardOutput:
    """Model predictions for a batch.

    ``seq3d`` is the full-sequence head on the first VTE stack (None without
    a VTE); ``seq3d_final`` is the second full-sequence head of the
    full-to-full scheme; ``target3d`` is the center-frame prediction used for
    evaluation in every scheme.
    """

    seq3d: Tensor | None
    target3d: Tensor
    seq3d_final: Tensor | None = None
    attention: dict[str, np.ndarray] = field(default_factory=dict)


def _get(params: Params, path: str) -> Tensor:
    v = params[path]
    return v if isinstance(v, Tensor) else Tensor(v)


def _stats(params: Params, prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for k in ("running_mean", "running_var", "num_updates"):
        v = params[f"{prefix}.{k}"]
        out[k] = v.data if isinstance(v, Tensor) else v
    return out


def pose_embedding(cfg: ModelConfig, params: Params, P, mode: str = "eval", rng: RngStream | None = None) -> Tensor:
    """(B, T, J, 2) keypoints -> (B, T, d_model) tokens: width-1 conv, BN, dropout, ReLU."""
    P = nx.as_tensor(P)
    if P.ndim == 3:
        P = nx.reshape(P, (1,) + P.shape)
    B, T, J, c = P.shape
    if (T, J, c) != (cfg.frames, cfg.joints, 2):
        raise ConfigError(f"input shape {P.shape[1:]} does not match config ({cfg.frames}, {cfg.joints}, 2)")
    nx.tensor.check_finite(P.data, "pose_embedding input")
    x = nx.reshape(P, (B, T, 2 * J))
    x = nx.conv1d_strided(x, _get(params, "embed.conv.kernel"), _get(params, "embed.conv.bias"), 1)
    x = nx.batch_norm_1d(
        x,
        _get(params, "embed.bn.gain"),
        _get(params, "embed.bn.shift"),
        _stats(params, "embed.bn"),
        momentum=cfg.bn_momentum,
        eps=cfg.eps,
        mode=mode,
    )
    x = nx.dropout(x, cfg.dropout, rng, mode)
    return nx.relu(x)


def msa(Z, params: Params, prefix: str, heads: int) -> tuple[Tensor, np.ndarray]:
    """Multi-head self-attention over (B, L, D); returns output and (B, h, L, L) weights."""
    Z = nx.as_tensor(Z)
    B, L, D = Z.shape
    if D % heads:
        raise ConfigError(f"width {D} is not divisible by {heads} heads")
    dk = D // heads

    def split(name: str) -> Tensor:
        x = nx.linear(Z, _get(params, f"{prefix}.w{name}"), _get(params, f"{prefix}.b{name}"))
        return nx.transpose(nx.reshape(x, (B, L, heads, dk)), (0, 2, 1, 3))

    q, k, v = split("q"), split("k"), split("v")
    scores = nx.matmul(q, nx.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dk))
    attn = nx.softmax(scores, axis=-1)
    out = nx.matmul(attn, v)
    out = nx.reshape(nx.transpose(out, (0, 2, 1, 3)), (B, L, D))
    return nx.linear(out, _get(params, f"{prefix}.wo"), _get(params, f"{prefix}.bo")), attn.data


def _ln(x, params: Params, prefix: str, eps: float) -> Tensor:
    return nx.layer_norm(x, _get(params, f"{prefix}.gain"), _get(params, f"{prefix}.shift"), eps)


def vte_layer(cfg: ModelConfig, params: Params, Z, index: int, mode: str = "eval", rng: RngStream | None = None):
    """Pre-norm encoder layer; returns (output, attention weights)."""
    p = f"vte.{index}"
    with mac_scope("msa"):
        a, maps = msa(_ln(Z, params, f"{p}.ln1", cfg.eps), params, f"{p}.msa", cfg.heads)
    Z = nx.add(Z, a)
    with mac_scope("ffn"):
        h = nx.linear(_ln(Z, params, f"{p}.ln2", cfg.eps), _get(params, f"{p}.ffn.w1"), _get(params, f"{p}.ffn.b1"))
        h = nx.dropout(nx.relu(h), cfg.dropout, rng, mode)
        h = nx.linear(h, _get(params, f"{p}.ffn.w2"), _get(params, f"{p}.ffn.b2"))
    return nx.add(Z, h), maps


def ste_layer(cfg: ModelConfig, params: Params, Z, index: int, mode: str = "eval", rng: RngStream | None = None):
    """Strided encoder layer: (B, L, D) -> (B, ceil(L / s), D); returns (output, attention)."""
    p = f"ste.{index}"
    Z = nx.as_tensor(Z)
    pos = _get(params, f"{p}.pos")
    if pos.shape[0] != Z.shape[1]:
        raise ConfigError(f"{p}: position table length {pos.shape[0]} != sequence length {Z.shape[1]}")
    stride = cfg.s_m[index]
    Z = nx.add(Z, pos)
    with mac_scope("msa"):
        a, maps = msa(_ln(Z, params, f"{p}.ln1", cfg.eps), params, f"{p}.msa", cfg.heads)
    Z = nx.add(Z, a)
    with mac_scope("cffn"):
        h = nx.conv1d_strided(
            _ln(Z, params, f"{p}.ln2", cfg.eps),
            _get(params, f"{p}.cffn.conv1.kernel"),
            _get(params, f"{p}.cffn.conv1.bias"),
            cfg.s_f,
        )
        h = nx.dropout(nx.relu(h), cfg.dropout, rng, mode)
        h = nx.conv1d_strided(h, _get(params, f"{p}.cffn.conv2.kernel"), _get(params, f"{p}.cffn.conv2.bias"), stride)
    return nx.add(nx.maxpool1d(Z, stride), h), maps


def regression_head(cfg: ModelConfig, params: Params, Z, prefix: str, mode: str = "eval") -> Tensor:
    """Batch norm then width-1 conv to J*3 channels; (B, L, D) -> (B, L, J, 3)."""
    Z = nx.as_tensor(Z)
    B, L, _ = Z.shape
    x = nx.batch_norm_1d(
        Z,
        _get(params, f"{prefix}.bn.gain"),
        _get(params, f"{prefix}.bn.shift"),
        _stats(params, f"{prefix}.bn"),
        momentum=cfg.bn_momentum,
        eps=cfg.eps,
        mode=mode,
    )
    x = nx.conv1d_strided(x, _get(params, f"{prefix}.conv.kernel"), _get(params, f"{prefix}.conv.bias"), 1)
    return nx.reshape(x, (B, L, cfg.joints, 3))


def _scoped(name: str, fn, *args, **kwargs):
    with mac_scope(name):
        try:
            return fn(*args, **kwargs)
        except NumericError as exc:
            raise NumericError(f"{name}: {exc}") from exc


def forward(
    cfg: ModelConfig,
    params: Params,
    P,
    mode: str = "eval",
    rng: RngStream | None = None,
    retain_attention: bool = False,
) -> ForwardOutput:
    """Run the network on (B, T, J, 2) or (T, J, 2) keypoints."""
    if mode == "train" and cfg.dropout > 0 and rng is None:
        raise ConfigError("train mode with dropout needs an RngStream")
    attention: dict[str, np.ndarray] = {}
    Z = _scoped("embed", pose_embedding, cfg, params, P, mode, rng)
    Z = nx.add(Z, _get(params, "pos.vte"))

    seq3d = seq3d_final = None
    n_total = n_vte_layers(cfg)
    for i in range(n_total):
        Z, maps = _scoped(f"vte.{i}", vte_layer, cfg, params, Z, i, mode, rng)
        if retain_attention:
            attention[f"vte.{i}"] = maps
        if i == cfg.n_vte - 1 and cfg.scheme != "full":
            seq3d = _scoped("head_seq", regression_head, cfg, params, Z, "head_seq", mode)

    c = cfg.center
    if cfg.second_stack == "ste":
        for n in range(cfg.n_ste):
            Z, maps = _scoped(f"ste.{n}", ste_layer, cfg, params, Z, n, mode, rng)
            if retain_attention:
                attention[f"ste.{n}"] = maps
        target = _scoped("head_target", regression_head, cfg, params, Z, "head_target", mode)
        target3d = nx.take(target, (slice(None), 0))
    elif cfg.scheme == "full":
        seq3d = _scoped("head_seq", regression_head, cfg, params, Z, "head_seq", mode)
        target3d = nx.take(seq3d, (slice(None), c))
    elif cfg.scheme == "full-to-full":
        seq3d_final = _scoped("head_seq2", regression_head, cfg, params, Z, "head_seq2", mode)
        target3d = nx.take(seq3d_final, (slice(None), c))
    else:
        # w/o STE: the center frame of the sequence head is the prediction
        target3d = nx.take(seq3d, (slice(None), c))
    return ForwardOutput(seq3d=seq3d, target3d=target3d, seq3d_final=seq3d_final, attention=attention)
