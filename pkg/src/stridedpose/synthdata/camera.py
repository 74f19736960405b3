from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import RngStream


def _front_view() -> np.ndarray:
    # camera x = world x, camera y = -world y (image rows grow downwards), looking down -z
    return np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class CameraSpec:
    """Pinhole camera; ``p_cam = rotation @ p_world + translation`` (mm)."""

    focal: float = 1145.0
    principal: tuple[float, float] = (500.0, 500.0)
    width: int = 1000
    height: int = 1000
    rotation: np.ndarray = field(default_factory=_front_view)
    translation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 4500.0]))

    def __post_init__(self):
        if self.focal <= 0:
            raise ValueError("focal length must be positive")

    def px_to_normalized(self, sigma_px: float) -> float:
        """Convert a pixel distance to normalized-coordinate units."""
        return 2.0 * sigma_px / self.width


def to_camera(points3d: np.ndarray, camera: CameraSpec) -> np.ndarray:
    return points3d @ np.asarray(camera.rotation).T + np.asarray(camera.translation)


def project(points3d: np.ndarray, camera: CameraSpec) -> np.ndarray:
    """Pinhole projection of world points (..., 3) to normalized image coordinates (..., 2).

    Pixels map to [-1, 1] along x and [-h/w, h/w] along y, so the image
    center lands on (0, 0).
    """
    pc = to_camera(np.asarray(points3d, dtype=np.float64), camera)
    z = pc[..., 2]
    if np.any(z <= 0):
        raise ValueError("point behind the camera (non-positive depth)")
    u = camera.focal * pc[..., 0] / z + camera.principal[0]
    v = camera.focal * pc[..., 1] / z + camera.principal[1]
    return np.stack([u / camera.width * 2 - 1, v / camera.width * 2 - camera.height / camera.width], axis=-1)


def add_noise(input2d: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) to every coordinate."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    input2d = np.asarray(input2d, dtype=np.float64)
    if sigma == 0:
        return input2d.copy()
    return input2d + RngStream(seed).normal(input2d.shape, sigma)
