"""Synthetic motion-capture substitute for training and evaluation."""

from .camera import CameraSpec, add_noise, project, to_camera
from .dataset import (
    DatasetFormatError,
    PoseSequenceSample,
    Sequence,
    build_samples,
    flip_poses,
    horizontal_flip,
    make_sequences,
    read_dataset,
    stack_samples,
    window,
    write_dataset,
)
from .motion import ACTIONS, generate_motion
from .skeleton import SkeletonSpec, h36m_skeleton

__all__ = [
    "ACTIONS",
    "CameraSpec",
    "DatasetFormatError",
    "PoseSequenceSample",
    "Sequence",
    "SkeletonSpec",
    "add_noise",
    "build_samples",
    "flip_poses",
    "generate_motion",
    "h36m_skeleton",
    "horizontal_flip",
    "make_sequences",
    "project",
    "read_dataset",
    "stack_samples",
    "to_camera",
    "window",
    "write_dataset",
]
