"""Training losses and evaluation metrics for root-relative 3D poses.

Losses are differentiable (they accept ``Tensor`` predictions); metrics are
plain numpy and return millimeters when inputs are in millimeters.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .numerics import ConfigError, DimensionError, Tensor

logger = logging.getLogger(__name__)


def _check_shapes(pred, gt) -> None:
    if tuple(pred.shape) != tuple(gt.shape):
        raise DimensionError(f"prediction shape {tuple(pred.shape)} != ground truth {tuple(gt.shape)}")
    if pred.shape[-1] != 3:
        raise DimensionError("poses must have 3 coordinates in the last axis")


def sequence_loss(pred_seq, gt_seq) -> Tensor:
    """Sum over frames and joints of the joint-wise Euclidean error (not a mean)."""
    pred_seq = nx.as_tensor(pred_seq)
    _check_shapes(pred_seq, np.asarray(gt_seq))
    return nx.sum_all(nx.l2_norm(nx.sub(pred_seq, gt_seq)))


def single_frame_loss(pred, gt) -> Tensor:
    """Same as ``sequence_loss`` for a single (J, 3) target frame (or a batch of them)."""
    return sequence_loss(pred, gt)


def total_loss(loss_f, loss_s, lambda_f: float = 1.0, lambda_s: float = 1.0, scheme: str = "full-to-single"):
    """Weighted sum of the two supervision terms.

    The "full" scheme drops the second term and "single" drops the first;
    every other scheme keeps both. ``None`` terms count as absent.
    """
    if lambda_f < 0 or lambda_s < 0:
        raise ConfigError("loss weights must be non-negative")
    if scheme == "single":
        lambda_f = 0.0
    elif scheme == "full":
        lambda_s = 0.0
    if lambda_f == 0 and lambda_s == 0:
        raise ConfigError("both loss weights are zero")
    terms = []
    if loss_f is not None and lambda_f:
        terms.append(nx.mul(loss_f, lambda_f))
    if loss_s is not None and lambda_s:
        terms.append(nx.mul(loss_s, lambda_s))
    if not terms:
        raise ConfigError(f"scheme {scheme!r} leaves no active loss term")
    out = terms[0]
    for t in terms[1:]:
        out = nx.add(out, t)
    return out


def _per_joint_error(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    _check_shapes(pred, gt)
    return np.linalg.norm(pred - gt, axis=-1)


def mpjpe(pred, gt) -> float:
    """Mean per-joint position error over every frame and joint."""
    return float(_per_joint_error(pred, gt).mean())


def procrustes_align(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Align each (J, 3) frame of ``pred`` to ``gt`` by the best similarity transform.

    Rotation comes from the SVD of the cross-covariance with the determinant
    sign corrected, so reflections are never used. Frames whose prediction
    collapses to a point are only translated.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_shapes(pred, gt)
    flat_p = pred.reshape(-1, *pred.shape[-2:])
    flat_g = gt.reshape(-1, *gt.shape[-2:])
    out = np.empty_like(flat_p)
    for i, (X, Y) in enumerate(zip(flat_p, flat_g)):
        mx, my = X.mean(axis=0), Y.mean(axis=0)
        X0, Y0 = X - mx, Y - my
        nx_ = np.sum(X0 * X0)
        if nx_ < 1e-24 or np.sum(Y0 * Y0) < 1e-24:
            logger.warning("degenerate pose in Procrustes alignment; translation only")
            out[i] = X0 + my
            continue
        U, S, Vt = np.linalg.svd(X0.T @ Y0)
        D = np.eye(3)
        D[2, 2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
        R = U @ D @ Vt
        scale = np.sum(S * np.diag(D)) / nx_
        out[i] = scale * X0 @ R + my
    return out.reshape(pred.shape)


def p_mpjpe(pred, gt) -> float:
    """MPJPE after per-frame similarity alignment of the prediction."""
    return mpjpe(procrustes_align(pred, gt), gt)


def mpjve(pred_seq, gt_seq) -> float:
    """MPJPE of the first temporal difference; the frame axis is axis 0."""
    pred_seq, gt_seq = np.asarray(pred_seq, dtype=np.float64), np.asarray(gt_seq, dtype=np.float64)
    _check_shapes(pred_seq, gt_seq)
    if pred_seq.ndim < 3 or pred_seq.shape[0] < 2:
        raise DimensionError("velocity error needs a (frames >= 2, J, 3) sequence")
    return mpjpe(np.diff(pred_seq, axis=0), np.diff(gt_seq, axis=0))


@dataclass
class MetricReport:
    mpjpe: float
    p_mpjpe: float
    mpjve: float
    per_action: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["action", "mpjpe", "p_mpjpe", "mpjve"])
        for action in sorted(self.per_action):
            m = self.per_action[action]
            w.writerow([action, f"{m['mpjpe']:.6f}", f"{m['p_mpjpe']:.6f}", f"{m['mpjve']:.6f}"])
        w.writerow(["Avg.", f"{self.mpjpe:.6f}", f"{self.p_mpjpe:.6f}", f"{self.mpjve:.6f}"])
        return buf.getvalue()
