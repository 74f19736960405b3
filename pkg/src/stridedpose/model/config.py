from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..numerics import ConfigError, conv_output_length

SCHEMES = ("full", "single", "full-to-full", "single-to-single", "full-to-single")

# Receptive field -> per-layer STE strides used in the reference setup.
STRIDE_SCHEDULES = {
    27: [3, 3, 3],
    81: [9, 3, 3],
    243: [3, 9, 9],
    351: [3, 9, 13],
}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters. Field names double as JSON keys."""

    frames: int = 27
    joints: int = 17
    d_model: int = 256
    d_ff: int = 512
    heads: int = 8
    n_vte: int = 3
    n_ste: int = 3
    k_f: int = 1
    k_m: int = 3
    s_f: int = 1
    s_m: tuple[int, ...] = (3, 3, 3)
    dropout: float = 0.1
    lambda_f: float = 1.0
    lambda_s: float = 1.0
    scheme: str = "full-to-single"
    bn_momentum: float = 0.1
    eps: float = 1e-5
    # Millimeters per unit of the regression output (the heads predict meters).
    output_unit_mm: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "s_m", tuple(int(s) for s in self.s_m))
        self.validate()

    @classmethod
    def for_frames(cls, frames: int, **overrides) -> "ModelConfig":
        if frames not in STRIDE_SCHEDULES:
            raise ConfigError(f"no default stride schedule for {frames} frames")
        return cls(frames=frames, s_m=tuple(STRIDE_SCHEDULES[frames]), **overrides)

    def validate(self) -> None:
        positive = ("frames", "joints", "d_model", "d_ff", "heads", "k_f", "k_m", "s_f")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_vte < 0 or self.n_ste < 0:
            raise ConfigError("layer counts must be non-negative")
        if self.d_model % self.heads:
            raise ConfigError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.k_f % 2 == 0 or self.k_m % 2 == 0:
            raise ConfigError("CFFN kernel sizes must be odd")
        if self.s_f != 1:
            raise ConfigError("first CFFN convolution must have stride 1")
        if self.output_unit_mm <= 0:
            raise ConfigError("output_unit_mm must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.lambda_f < 0 or self.lambda_s < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.lambda_f == 0 and self.lambda_s == 0:
            raise ConfigError("both loss weights are zero")
        if self.n_vte == 0 and self.n_ste == 0:
            raise ConfigError("at least one encoder stack is required")
        if self.scheme in ("full", "full-to-full", "single-to-single") and (self.n_vte == 0 or self.n_ste == 0):
            raise ConfigError(f"scheme {self.scheme!r} needs both stacks")
        if self.second_stack == "ste":
            if len(self.s_m) != self.n_ste:
                raise ConfigError(f"s_m has {len(self.s_m)} entries for {self.n_ste} STE layers")
            if any(s < 1 for s in self.s_m):
                raise ConfigError("strides must be >= 1")
            if self.ste_lengths()[-1] != 1:
                raise ConfigError(f"strides {self.s_m} reduce {self.frames} frames to {self.ste_lengths()[-1]}, not 1")

    @property
    def center(self) -> int:
        return self.frames // 2

    @property
    def second_stack(self) -> str | None:
        """What follows the VTE: 'ste', 'vte' (full / full-to-full) or None (w/o STE)."""
        if self.n_ste == 0:
            return None
        return "vte" if self.scheme in ("full", "full-to-full") else "ste"

    def ste_lengths(self) -> list[int]:
        """Sequence length entering each STE layer, plus the final output length."""
        lengths = [self.frames]
        for s in self.s_m:
            lengths.append(conv_output_length(lengths[-1], s))
        return lengths

    def to_dict(self) -> dict:
        d = asdict(self)
        d["s_m"] = list(self.s_m)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_json().encode()).digest()

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "ModelConfig":
        d = self.to_dict()
        d.update(changes)
        return ModelConfig.from_dict(d)
