"""Windowed training samples, flip augmentation and the SPS1 dataset file.

SPS1 layout (little-endian)::

    b"SPS1" | u32 version=1 | u32 J | u32 T | u64 count
    count x ( f32[T*J*2] input2d | f32[T*J*3] target3d_seq
              | u32 seq_id | u32 frame | u16 len | action utf-8 )
    u64 checksum (blake2b-64 over everything before it)
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..numerics import RngStream
from .camera import CameraSpec, add_noise, project
from .motion import ACTIONS, generate_motion
from .skeleton import SkeletonSpec, h36m_skeleton

MAGIC = b"SPS1"
VERSION = 1


class DatasetFormatError(ValueError):
    pass


@dataclass
class Sequence:
    seq_id: int
    action: str
    input2d: np.ndarray  # (F, J, 2) float32
    target3d: np.ndarray  # (F, J, 3) float32, root-relative mm


@dataclass
class PoseSequenceSample:
    input2d: np.ndarray  # (T, J, 2)
    target3d_seq: np.ndarray  # (T, J, 3)
    seq_id: int
    frame: int
    action: str

    @property
    def target3d_center(self) -> np.ndarray:
        return self.target3d_seq[self.target3d_seq.shape[0] // 2]


def make_sequences(
    seed: int,
    sequences: int,
    frames: int,
    sigma_px: float = 0.0,
    skeleton: SkeletonSpec | None = None,
    camera: CameraSpec | None = None,
    hz: float = 50.0,
    first_id: int = 0,
) -> list[Sequence]:
    """Generate, project and (optionally) corrupt ``sequences`` synthetic clips.

    Sequence ``i`` uses action ``ACTIONS[i % 5]``; each id draws from its own
    stream so disjoint id ranges can be produced independently.
    """
    skeleton = skeleton or h36m_skeleton()
    camera = camera or CameraSpec()
    root = RngStream(seed)
    sigma = camera.px_to_normalized(sigma_px)
    out = []
    for i in range(first_id, first_id + sequences):
        stream = root.child(f"seq{i}")
        motion_seed, noise_seed = (int(x) for x in stream.generator().integers(0, 2**63, size=2))
        action = ACTIONS[i % len(ACTIONS)]
        world = generate_motion(skeleton, motion_seed, frames, hz=hz, action=action)
        p2d = add_noise(project(world, camera), sigma, noise_seed)
        rel = world - world[:, :1]
        out.append(Sequence(i, action, p2d.astype(np.float32), rel.astype(np.float32)))
    return out


def window(sequence: Sequence, T: int) -> list[PoseSequenceSample]:
    """One length-``T`` window per frame, centered on it; edges are replicated."""
    if T < 1 or T % 2 == 0:
        raise ValueError(f"window length must be odd, got {T}")
    F = sequence.input2d.shape[0]
    c = T // 2
    samples = []
    for t in range(F):
        idx = np.clip(np.arange(t - c, t + c + 1), 0, F - 1)
        samples.append(
            PoseSequenceSample(sequence.input2d[idx], sequence.target3d[idx], sequence.seq_id, t, sequence.action)
        )
    return samples


def build_samples(sequences: list[Sequence], T: int) -> list[PoseSequenceSample]:
    return [s for seq in sequences for s in window(seq, T)]


def flip_poses(poses: np.ndarray, skeleton: SkeletonSpec) -> np.ndarray:
    """Mirror (..., J, C) poses: negate x and swap left/right joints."""
    out = np.array(poses, copy=True)[..., skeleton.flip_permutation(), :]
    out[..., 0] *= -1
    return out


def horizontal_flip(sample: PoseSequenceSample, skeleton: SkeletonSpec) -> PoseSequenceSample:
    return PoseSequenceSample(
        flip_poses(sample.input2d, skeleton),
        flip_poses(sample.target3d_seq, skeleton),
        sample.seq_id,
        sample.frame,
        sample.action,
    )


def stack_samples(samples: list[PoseSequenceSample]) -> tuple[np.ndarray, np.ndarray]:
    """(N, T, J, 2) inputs and (N, T, J, 3) targets as float64."""
    x = np.stack([s.input2d for s in samples]).astype(np.float64)
    y = np.stack([s.target3d_seq for s in samples]).astype(np.float64)
    return x, y


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def dumps(samples: list[PoseSequenceSample]) -> bytes:
    if not samples:
        raise ValueError("no samples to write")
    T, J, _ = samples[0].input2d.shape
    parts = [MAGIC, struct.pack("<IIIQ", VERSION, J, T, len(samples))]
    for s in samples:
        if s.input2d.shape != (T, J, 2) or s.target3d_seq.shape != (T, J, 3):
            raise ValueError("inconsistent sample shapes")
        tag = s.action.encode()
        parts.append(np.ascontiguousarray(s.input2d, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(s.target3d_seq, dtype="<f4").tobytes())
        parts.append(struct.pack("<IIH", s.seq_id, s.frame, len(tag)) + tag)
    payload = b"".join(parts)
    return payload + _checksum(payload)


def loads(blob: bytes) -> list[PoseSequenceSample]:
    head = 4 + struct.calcsize("<IIIQ")
    if len(blob) < head + 8:
        raise DatasetFormatError("dataset truncated")
    if blob[:4] != MAGIC:
        raise DatasetFormatError("bad magic; not an SPS1 dataset")
    version, J, T, count = struct.unpack_from("<IIIQ", blob, 4)
    if version != VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version}")
    payload, tail = blob[:-8], blob[-8:]
    if _checksum(payload) != tail:
        raise DatasetFormatError("dataset checksum mismatch (corrupt or truncated file)")
    n2, n3 = T * J * 2, T * J * 3
    off = head
    samples = []
    for _ in range(count):
        x = np.frombuffer(payload, "<f4", n2, off).reshape(T, J, 2).astype(np.float32)
        off += 4 * n2
        y = np.frombuffer(payload, "<f4", n3, off).reshape(T, J, 3).astype(np.float32)
        off += 4 * n3
        seq_id, frame, n = struct.unpack_from("<IIH", payload, off)
        off += 10
        action = payload[off : off + n].decode()
        off += n
        samples.append(PoseSequenceSample(x, y, seq_id, frame, action))
    if off != len(payload):
        raise DatasetFormatError("trailing bytes in dataset")
    return samples


def write_dataset(samples: list[PoseSequenceSample], path: str | Path) -> None:
    Path(path).write_bytes(dumps(samples))


def read_dataset(path: str | Path) -> list[PoseSequenceSample]:
    return loads(Path(path).read_bytes())
