"""Command-line entry point: gen-data | train | eval | flops | attn.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .complexity import ComplexityReport
from .model import STRIDE_SCHEDULES, CheckpointError, ModelConfig, load_checkpoint
from .numerics import ConfigError, DimensionError
from .synthdata import DatasetFormatError, build_samples, make_sequences, read_dataset, write_dataset
from .training import TrainConfig, TrainingDiverged, evaluate, export_attention, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _gen_data(args) -> None:
    seqs = make_sequences(args.seed, args.sequences, args.frames, sigma_px=args.sigma, first_id=args.first_id)
    write_dataset(build_samples(seqs, args.window), args.out)
    print(f"wrote {args.sequences} sequences x {args.frames} frames (window {args.window}) to {args.out}")


def _train(args) -> None:
    tcfg = TrainConfig.from_json(args.config)
    overrides = {k: getattr(args, k) for k in ("epochs", "seed", "batch_size") if getattr(args, k) is not None}
    if overrides:
        tcfg = TrainConfig.from_dict({**tcfg.to_dict(), **overrides})
    train_set = read_dataset(args.data)
    eval_set = read_dataset(args.eval_data) if args.eval_data else None
    _, log = train(tcfg, train_set, eval_set, out_dir=args.out)
    last = log.rows[-1]
    print(f"trained {len(log.rows)} epochs; last train MPJPE {last['train_mpjpe']:.2f} mm; outputs in {args.out}")


def _eval(args) -> None:
    params, cfg = load_checkpoint(args.checkpoint)
    report = evaluate(cfg, params, read_dataset(args.data), flip_averaging=not args.no_flip)
    text = report.to_csv()
    if args.csv:
        Path(args.csv).write_text(text)
    print(text, end="")


def _flops(args) -> None:
    config = None
    if args.layers == 3 and args.stride == 3 and args.kernel == 3 and args.frames in STRIDE_SCHEDULES:
        config = ModelConfig.for_frames(args.frames).replace(d_model=args.dim, d_ff=2 * args.dim)
    rep = ComplexityReport.build(
        args.layers, args.frames, args.dim, args.stride, args.kernel, config=config, measure=args.measure
    )
    if args.csv:
        Path(args.csv).write_text(rep.to_csv())
    print(rep.to_text(), end="")


def _attn(args) -> None:
    params, cfg = load_checkpoint(args.checkpoint)
    samples = read_dataset(args.data)
    if not 0 <= args.index < len(samples):
        raise IndexError(f"sample index {args.index} out of range (0..{len(samples) - 1})")
    maps = export_attention(cfg, params, samples[args.index], args.out)
    print(f"exported {sum(m.shape[0] for m in maps.values())} maps from {len(maps)} layers to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stridedpose", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--sequences", type=int, default=10)
    g.add_argument("--frames", type=int, default=200, help="frames per sequence")
    g.add_argument("--sigma", type=float, default=0.0, help="2D noise std in pixels")
    g.add_argument("--window", type=int, default=27, help="frames per sample window (odd)")
    g.add_argument("--first-id", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=_gen_data)

    t = sub.add_parser("train", help="train from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--eval-data")
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--batch-size", type=int)
    t.set_defaults(fn=_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--no-flip", action="store_true", help="disable flip averaging")
    e.add_argument("--csv")
    e.set_defaults(fn=_eval)

    f = sub.add_parser("flops", help="print the complexity report")
    f.add_argument("--frames", type=int, default=27)
    f.add_argument("--dim", type=int, default=256)
    f.add_argument("--layers", type=int, default=3)
    f.add_argument("--stride", type=int, default=3)
    f.add_argument("--kernel", type=int, default=3)
    f.add_argument("--no-measure", dest="measure", action="store_false", help="skip the instrumented forward pass")
    f.add_argument("--csv")
    f.set_defaults(fn=_flops)

    a = sub.add_parser("attn", help="export attention maps for one sample")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--index", type=int, default=0)
    a.add_argument("--out", required=True)
    a.set_defaults(fn=_attn)
    return p


RUNTIME_ERRORS = (
    OSError,
    ConfigError,
    DimensionError,
    CheckpointError,
    DatasetFormatError,
    TrainingDiverged,
    IndexError,
    ValueError,
    FloatingPointError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.fn(args)
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
