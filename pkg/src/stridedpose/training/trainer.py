"""Training loop, evaluation and attention export."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .. import numerics as nx
from ..metrics import MetricReport, mpjpe, p_mpjpe, sequence_loss, single_frame_loss, total_loss
from ..model import ForwardOutput, ModelConfig, forward, init_params, is_trainable, save_checkpoint
from ..numerics import ConfigError, NumericError, RngStream, Tensor
from ..synthdata import PoseSequenceSample, SkeletonSpec, flip_poses, h36m_skeleton, stack_samples
from .optim import AMSGrad

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    lr0: float = 1e-3
    lr_decay: float = 0.95
    epochs: int = 20
    batch_size: int = 128
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    flip_augment: bool = True
    eval_flip: bool = True

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ConfigError("lr_decay must be in (0, 1]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")

    def lr_at(self, epoch: int) -> float:
        return self.lr0 * self.lr_decay**epoch

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


LOG_FIELDS = ("epoch", "lr", "loss_f", "loss_s", "loss_total", "train_mpjpe", "eval_mpjpe", "eval_p_mpjpe", "eval_mpjve")


@dataclass
class RunLog:
    rows: list[dict] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)

    def append(self, row: dict, seconds: float) -> None:
        self.rows.append(row)
        self.wall_time.append(seconds)

    def to_csv(self) -> str:
        """Deterministic part of the log; wall time is kept out so reruns compare bitwise."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_FIELDS)
        for r in self.rows:
            w.writerow([r["epoch"]] + [repr(float(r[k])) for k in LOG_FIELDS[1:]])
        return buf.getvalue()

    def timing_csv(self) -> str:
        return "epoch,seconds\n" + "".join(f"{r['epoch']},{t:.3f}\n" for r, t in zip(self.rows, self.wall_time))


def compute_losses(cfg: ModelConfig, out: ForwardOutput, target_seq: np.ndarray):
    """(first-stage loss, second-stage loss, weighted total) for one batch.

    Terms are per-sample sums of joint errors averaged over the batch.
    Which prediction each term supervises depends on the scheme; a term the
    architecture cannot produce is None.
    """
    B = target_seq.shape[0]
    c = cfg.center
    center = target_seq[:, c]
    loss_f = loss_s = None
    if cfg.scheme == "single-to-single":
        loss_f = single_frame_loss(nx.take(out.seq3d, (slice(None), c)), center)
    elif out.seq3d is not None:
        loss_f = sequence_loss(out.seq3d, target_seq)
    if cfg.scheme == "full-to-full":
        loss_s = sequence_loss(out.seq3d_final, target_seq)
    elif cfg.second_stack == "ste":
        loss_s = single_frame_loss(out.target3d, center)
    if loss_f is not None:
        loss_f = nx.mul(loss_f, 1.0 / B)
    if loss_s is not None:
        loss_s = nx.mul(loss_s, 1.0 / B)
    total = total_loss(loss_f, loss_s, cfg.lambda_f, cfg.lambda_s, cfg.scheme)
    return loss_f, loss_s, total


def _split_state(params: dict[str, np.ndarray]):
    trainable = {k: v for k, v in params.items() if is_trainable(k)}
    return trainable


def predict(
    cfg: ModelConfig,
    params: dict[str, np.ndarray],
    inputs: np.ndarray,
    flip_averaging: bool = False,
    skeleton: SkeletonSpec | None = None,
    batch_size: int = 256,
) -> np.ndarray:
    """Center-frame predictions (N, J, 3) in mm, eval mode."""
    skeleton = skeleton or h36m_skeleton()

    def run(x):
        return forward(cfg, params, x, mode="eval").target3d.data

    preds = []
    with nx.no_grad():
        for i in range(0, len(inputs), batch_size):
            x = inputs[i : i + batch_size]
            preds.append(flip_average(run, x, skeleton) if flip_averaging else run(x))
    return np.concatenate(preds) * cfg.output_unit_mm


def flip_average(fn, inputs: np.ndarray, skeleton: SkeletonSpec) -> np.ndarray:
    """Mean of ``fn(x)`` and the un-flipped ``fn(flip(x))``."""
    return 0.5 * (fn(inputs) + flip_poses(fn(flip_poses(inputs, skeleton)), skeleton))


def stitch_sequences(samples: list[PoseSequenceSample], values: np.ndarray) -> dict[int, np.ndarray]:
    """Group per-window values by sequence id, ordered by frame."""
    groups: dict[int, list[tuple[int, np.ndarray]]] = {}
    for s, v in zip(samples, values):
        groups.setdefault(s.seq_id, []).append((s.frame, v))
    return {k: np.stack([v for _, v in sorted(g, key=lambda fv: fv[0])]) for k, g in sorted(groups.items())}


def _report(samples, pred: np.ndarray, gt: np.ndarray) -> dict[str, float]:
    ps, gs = stitch_sequences(samples, pred), stitch_sequences(samples, gt)
    dp = [np.diff(ps[k], axis=0) for k in ps if len(ps[k]) > 1]
    dg = [np.diff(gs[k], axis=0) for k in gs if len(gs[k]) > 1]
    vel = mpjpe(np.concatenate(dp), np.concatenate(dg)) if dp else float("nan")
    return {"mpjpe": mpjpe(pred, gt), "p_mpjpe": p_mpjpe(pred, gt), "mpjve": vel}


def evaluate(
    cfg: ModelConfig,
    params: dict[str, np.ndarray],
    samples: list[PoseSequenceSample],
    flip_averaging: bool = True,
    skeleton: SkeletonSpec | None = None,
) -> MetricReport:
    """MPJPE / P-MPJPE on center frames; MPJVE on center predictions stitched per sequence."""
    if not samples:
        raise ValueError("empty evaluation set")
    T, J, _ = samples[0].input2d.shape
    if (T, J) != (cfg.frames, cfg.joints):
        raise ConfigError(f"dataset windows ({T}, {J}) do not match model ({cfg.frames}, {cfg.joints})")
    inputs, targets = stack_samples(samples)
    gt = targets[:, cfg.center]
    pred = predict(cfg, params, inputs, flip_averaging, skeleton)
    overall = _report(samples, pred, gt)
    per_action = {}
    for action in sorted({s.action for s in samples}):
        idx = [i for i, s in enumerate(samples) if s.action == action]
        per_action[action] = _report([samples[i] for i in idx], pred[idx], gt[idx])
    return MetricReport(overall["mpjpe"], overall["p_mpjpe"], overall["mpjve"], per_action)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SL_THREADS", "1")))
    except ValueError:
        return 1


def _batches(order, batch_size, flips, inputs, targets, skeleton, workers):
    """Yield (x, y) batches in a fixed order; assembly may run on worker threads."""

    def assemble(start):
        idx = order[start : start + batch_size]
        x, y = inputs[idx].copy(), targets[idx].copy()
        f = flips[start : start + batch_size]
        if f.any():
            x[f] = flip_poses(x[f], skeleton)
            y[f] = flip_poses(y[f], skeleton)
        return x, y

    starts = range(0, len(order), batch_size)
    if workers <= 1:
        for s in starts:
            yield assemble(s)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending: deque = deque()
        it = iter(starts)
        for s in it:
            pending.append(pool.submit(assemble, s))
            if len(pending) >= 2 * workers:
                break
        for s in it:
            yield pending.popleft().result()
            pending.append(pool.submit(assemble, s))
        while pending:
            yield pending.popleft().result()


def train(
    tcfg: TrainConfig,
    train_samples: list[PoseSequenceSample],
    eval_samples: list[PoseSequenceSample] | None = None,
    out_dir: str | Path | None = None,
    skeleton: SkeletonSpec | None = None,
    params: dict[str, np.ndarray] | None = None,
) -> tuple[dict[str, np.ndarray], RunLog]:
    """Train end to end; returns the best-epoch parameters and the run log.

    The best epoch is chosen by held-out MPJPE (train MPJPE without a
    held-out set). With ``out_dir`` the best checkpoint, ``log.csv`` and
    ``timing.csv`` are written there.
    """
    cfg = tcfg.model
    skeleton = skeleton or h36m_skeleton()
    if not train_samples:
        raise ValueError("empty training set")
    T, J, _ = train_samples[0].input2d.shape
    if (T, J) != (cfg.frames, cfg.joints):
        raise ConfigError(f"dataset windows ({T}, {J}) do not match model ({cfg.frames}, {cfg.joints})")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    params = {k: v.copy() for k, v in (params or init_params(cfg, tcfg.seed)).items()}
    trainable = _split_state(params)
    opt = AMSGrad(trainable, tcfg.lr0, (tcfg.beta1, tcfg.beta2), tcfg.adam_eps)
    inputs, targets = stack_samples(train_samples)
    targets = targets / cfg.output_unit_mm
    root = RngStream(tcfg.seed)
    shuffle_rng, flip_rng, drop_rng = root.child("shuffle"), root.child("flip"), root.child("dropout")
    workers = _worker_count()

    log = RunLog()
    best_score, best_params = np.inf, None
    last_good = {k: v.copy() for k, v in params.items()}
    for epoch in range(tcfg.epochs):
        start = time.perf_counter()
        opt.lr = tcfg.lr_at(epoch)
        order = shuffle_rng.permutation(len(inputs))
        flips = flip_rng.uniform(len(inputs)) < 0.5 if tcfg.flip_augment else np.zeros(len(inputs), bool)
        sums = np.zeros(3)
        n_batches = 0
        for x, y in _batches(order, tcfg.batch_size, flips, inputs, targets, skeleton, workers):
            leaves = {k: Tensor(v, requires_grad=True, name=k) for k, v in trainable.items()}
            view = {**params, **leaves}
            try:
                out = forward(cfg, view, x, mode="train", rng=drop_rng)
                loss_f, loss_s, loss = compute_losses(cfg, out, y)
                grads = nx.backward(loss, leaves)
                if not all(np.all(np.isfinite(g)) for g in grads.values()):
                    raise NumericError("non-finite gradient")
            except NumericError as exc:
                params.update({k: v.copy() for k, v in last_good.items()})
                if out_dir is not None:
                    save_checkpoint(last_good, cfg, out_dir / "last_good.ckpt")
                raise TrainingDiverged(f"epoch {epoch}, batch {n_batches}: {exc}") from exc
            opt.step(grads)
            # Per-joint-per-frame mean errors in mm, for monitoring only.
            sums += [
                float(loss_f.data) / (T * J if cfg.scheme != "single-to-single" else J) if loss_f is not None else 0.0,
                float(loss_s.data) / (J if cfg.second_stack == "ste" else T * J) if loss_s is not None else 0.0,
                float(loss.data),
            ]
            n_batches += 1
        last_good = {k: v.copy() for k, v in params.items()}
        sums /= max(n_batches, 1)
        train_mpjpe = mpjpe(predict(cfg, params, inputs, False, skeleton), targets[:, cfg.center] * cfg.output_unit_mm)
        row = {
            "epoch": epoch,
            "lr": opt.lr,
            "loss_f": sums[0] * cfg.output_unit_mm,
            "loss_s": sums[1] * cfg.output_unit_mm,
            "loss_total": sums[2],
            "train_mpjpe": train_mpjpe,
            "eval_mpjpe": np.nan,
            "eval_p_mpjpe": np.nan,
            "eval_mpjve": np.nan,
        }
        score = train_mpjpe
        if eval_samples:
            rep = evaluate(cfg, params, eval_samples, tcfg.eval_flip, skeleton)
            row.update(eval_mpjpe=rep.mpjpe, eval_p_mpjpe=rep.p_mpjpe, eval_mpjve=rep.mpjve)
            score = rep.mpjpe
        log.append(row, time.perf_counter() - start)
        logger.info("epoch %d lr %.2e loss %.4f train %.2f eval %.2f", epoch, opt.lr, sums[2], train_mpjpe, row["eval_mpjpe"])
        if score < best_score:
            best_score = score
            best_params = {k: v.copy() for k, v in params.items()}

    if out_dir is not None:
        save_checkpoint(best_params, cfg, out_dir / "best.ckpt")
        (out_dir / "log.csv").write_text(log.to_csv())
        (out_dir / "timing.csv").write_text(log.timing_csv())
    return best_params, log


def export_attention(
    cfg: ModelConfig,
    params: dict[str, np.ndarray],
    sample: PoseSequenceSample,
    out_dir: str | Path,
) -> dict[str, np.ndarray]:
    """Write every layer/head attention map as CSV and 8-bit grayscale PNG.

    Files are named ``attn_<stack>_l<layer>_h<head>.{csv,png}``. Returns the
    in-memory maps, keyed by layer, each (heads, L, L).
    """
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with nx.no_grad():
        out = forward(cfg, params, sample.input2d[None].astype(np.float64), mode="eval", retain_attention=True)
    maps = {k: v[0] for k, v in out.attention.items()}
    for layer, m in maps.items():
        stack, idx = layer.split(".")
        for h, head in enumerate(m):
            stem = out_dir / f"attn_{stack}_l{idx}_h{h}"
            np.savetxt(f"{stem}.csv", head, delimiter=",", fmt="%.17g")
            peak = head.max()
            img = np.round(255 * head / peak).astype(np.uint8) if peak > 0 else np.zeros(head.shape, np.uint8)
            Image.fromarray(img, mode="L").save(f"{stem}.png")
    return maps
