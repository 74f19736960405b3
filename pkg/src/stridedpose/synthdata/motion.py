"""Band-limited random motion through forward kinematics."""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from ..numerics import RngStream
from .skeleton import SkeletonSpec

ACTIONS = ("walk", "wave", "squat", "turn", "idle")

# Per-action gain on each body group: root, legs, spine, arms.
_ACTION_GAINS = {
    "walk": (0.5, 1.0, 0.3, 0.6),
    "wave": (0.2, 0.2, 0.3, 1.0),
    "squat": (0.2, 1.0, 0.5, 0.3),
    "turn": (1.0, 0.4, 0.4, 0.4),
    "idle": (0.15, 0.15, 0.15, 0.15),
}
_GROUP = {"root": 0, "legs": 1, "spine": 2, "arms": 3}

MAX_FREQ_HZ = 1.5
MAX_SINUSOIDS = 5
MAX_STEP_MM = 40.0  # per frame at 50 Hz
ROOT_SWAY_MM = 150.0


def _joint_profile(spec: SkeletonSpec, j: int) -> tuple[str, tuple[float, float, float]]:
    """Body group and per-axis base amplitude (rad) of the rotation at joint ``j``."""
    name = spec.names[j] if j < len(spec.names) else ""
    if j == 0:
        return "root", (0.1, 0.8, 0.1)
    if name.endswith("hip"):
        return "legs", (0.6, 0.2, 0.2)
    if name.endswith("knee"):
        return "legs", (0.8, 0.0, 0.0)
    if name.endswith("shoulder"):
        return "arms", (0.8, 0.8, 0.8)
    if name.endswith("elbow"):
        return "arms", (0.8, 0.0, 0.0)
    return "spine", (0.2, 0.2, 0.2)


def _speed_bound(spec: SkeletonSpec, rates: np.ndarray, sway_rate: float) -> float:
    """Upper bound on any joint's speed (mm/s) given per-joint angular speed bounds."""
    J = spec.num_joints
    lengths = spec.bone_lengths
    worst = 0.0
    for i in range(J):
        speed = sway_rate
        dist = 0.0
        node = i
        while node != 0:
            dist += lengths[node]
            node = spec.parents[node]
            speed += rates[node] * dist
        worst = max(worst, speed)
    return worst


def generate_motion(
    spec: SkeletonSpec,
    seed: int,
    frames: int,
    hz: float = 50.0,
    action: str = "walk",
    amplitude: float = 1.0,
) -> np.ndarray:
    """World-space joint positions (frames, J, 3) in mm.

    Every rotation axis follows a sum of at most five sinusoids below
    ``MAX_FREQ_HZ``. Amplitudes are scaled so that the analytic speed bound
    keeps every joint under ``MAX_STEP_MM`` per frame at 50 Hz.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if action not in _ACTION_GAINS:
        raise ValueError(f"unknown action {action!r}")
    rng = RngStream(seed)
    gains = _ACTION_GAINS[action]
    J = spec.num_joints
    rotating = [j for j in range(J) if spec.children(j)]
    t = np.arange(frames) / hz

    # (J, 3, MAX_SINUSOIDS) amplitude / frequency / phase tables
    amp = np.zeros((J, 3, MAX_SINUSOIDS))
    draws = rng.generator()
    freq = draws.uniform(0.1, MAX_FREQ_HZ, size=amp.shape)
    phase = draws.uniform(0, 2 * np.pi, size=amp.shape)
    base = np.zeros((J, 3))
    for j in rotating:
        group, axes = _joint_profile(spec, j)
        g = gains[_GROUP[group]] * amplitude
        for a, b in enumerate(axes):
            n = int(draws.integers(1, MAX_SINUSOIDS + 1))
            amp[j, a, :n] = b * g * draws.uniform(0.3, 1.0, size=n) / n
            base[j, a] = b * g * draws.uniform(-0.3, 0.3)
    base[0, 1] = draws.uniform(-np.pi / 3, np.pi / 3) if amplitude > 0 else 0.0
    sway_amp = ROOT_SWAY_MM * amplitude * draws.uniform(0.0, 1.0, size=2)
    sway_freq = draws.uniform(0.05, 0.5, size=2)
    sway_phase = draws.uniform(0, 2 * np.pi, size=2)

    rates = (2 * np.pi * freq * amp).sum(axis=(1, 2))
    sway_rate = float(np.hypot(*(2 * np.pi * sway_freq * sway_amp)))
    bound = _speed_bound(spec, rates, sway_rate)
    limit = 0.95 * MAX_STEP_MM * 50.0
    if bound > limit:
        scale = limit / bound
        amp *= scale
        sway_amp *= scale

    angles = base[None] + np.einsum("jak,tjak->tja", amp, np.sin(2 * np.pi * freq[None] * t[:, None, None, None] + phase[None]))
    local = Rotation.from_euler("xyz", angles.reshape(-1, 3)).as_matrix().reshape(frames, J, 3, 3)

    pos = np.zeros((frames, J, 3))
    glob = np.zeros((frames, J, 3, 3))
    glob[:, 0] = local[:, 0]
    sway = sway_amp[None] * np.sin(2 * np.pi * sway_freq[None] * t[:, None] + sway_phase[None])
    pos[:, 0, 0] = sway[:, 0]
    pos[:, 0, 2] = sway[:, 1]
    for j in range(1, J):
        p = spec.parents[j]
        pos[:, j] = pos[:, p] + np.einsum("tab,b->ta", glob[:, p], spec.offsets[j])
        glob[:, j] = glob[:, p] @ local[:, j]
    return pos
