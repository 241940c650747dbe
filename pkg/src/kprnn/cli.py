"""Command-line front end wiring the pipeline end to end.

Subcommands: ingest, track, train, predict, generate, render, eval.
Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure.  All errors go to stderr on a single line prefixed "error:".
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import DataError, NumericalError
from .metrics import export_curve, persistence_baseline
from .normalize import normalize
from .openpose_io import DEFAULT_PATTERN, load_sequence
from .pose import NORMALIZED, RAW_PIXELS, PoseSequence, array_to_frames, sequence_to_array
from .pose_io import MultiPersonSequence, read_pose_file, read_sequence, write_multi, write_sequence
from .network import generate, predict_windows
from .render import RenderStyle, render_sequence
from .tracking import TrackerConfig, select_person
from .training import (
    Hyperparameters,
    evaluate_rmse,
    load_checkpoint,
    make_windows,
    save_checkpoint,
    split_pairs,
    train,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _build_parser() -> _Parser:
    parser = _Parser(prog="kprnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="seed for every random decision of the command")

    p = sub.add_parser("ingest", parents=[common],
                       help="parse a directory of OpenPose JSON files")
    p.add_argument("directory")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=float, required=True,
                   help="source frame width in pixels")
    p.add_argument("--height", type=float, required=True,
                   help="source frame height in pixels")
    p.add_argument("--pattern", default=DEFAULT_PATTERN,
                   help="filename regex with one frame-number capture group")
    p.add_argument("--allow-gaps", action="store_true",
                   help="accept non-consecutive frame numbers")

    p = sub.add_parser("track", parents=[common],
                       help="reduce multi-person frames to one person")
    p.add_argument("poses")
    p.add_argument("--out", required=True)
    p.add_argument("--max-jump", type=float, default=0.2,
                   help="max centroid move per frame, as a fraction of the diagonal")
    p.add_argument("--selection", default="highest_confidence",
                   help='anchor rule: "highest_confidence" or "index_<k>"')

    p = sub.add_parser("train", parents=[common],
                       help="train the next-frame predictor")
    p.add_argument("poses", nargs="+")
    p.add_argument("--config", default=None,
                   help="JSON file mirroring the hyperparameter fields")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--curve", default=None, help="training-curve CSV output path")

    p = sub.add_parser("predict", parents=[common],
                       help="one-step predictions over all full windows")
    p.add_argument("checkpoint")
    p.add_argument("poses")
    p.add_argument("--out", required=True)

    p = sub.add_parser("generate", parents=[common],
                       help="autoregressive motion generation from the last window")
    p.add_argument("checkpoint")
    p.add_argument("poses")
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", parents=[common],
                       help="render a pose sequence as stick-figure PNGs")
    p.add_argument("poses")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--width", type=_positive_int, default=512)
    p.add_argument("--height", type=_positive_int, default=512)
    p.add_argument("--overwrite", action="store_true")

    p = sub.add_parser("eval", parents=[common],
                       help="report model RMSE and the persistence baseline")
    p.add_argument("checkpoint")
    p.add_argument("poses")
    return parser


def _normalized(seq: PoseSequence) -> PoseSequence:
    if seq.space == NORMALIZED:
        return seq
    result = normalize(seq)
    if result.clamped:
        print(f"warning: clamped {result.clamped} out-of-bounds coordinates",
              file=sys.stderr)
    return result.sequence


def _load_hyper(args) -> Hyperparameters:
    if args.config is None:
        hyper = Hyperparameters()
    else:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{args.config}: malformed JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise DataError(f"{args.config}: config must be a JSON object")
        hyper = Hyperparameters.from_dict(doc)
    if args.seed is not None:
        hyper.seed = args.seed
        hyper.validate()
    return hyper


def _eligible_windows(seq: PoseSequence, window_length: int):
    """All full windows, including the final one that predicts past the end."""
    arr = sequence_to_array(seq)
    n = arr.shape[0]
    if n < window_length:
        raise DataError(
            f"sequence of length {n} is shorter than the window ({window_length})"
        )
    windows = np.stack([arr[i:i + window_length]
                        for i in range(n - window_length + 1)])
    indices = [seq.frames[p].frame_index for p in range(window_length, n)]
    indices.append(seq.frames[-1].frame_index + 1)
    return windows, indices


def _cmd_ingest(args) -> int:
    frames = load_sequence(args.directory, args.pattern, args.allow_gaps)
    write_multi(MultiPersonSequence(tuple(frames), args.width, args.height),
                args.out)
    people = sum(len(f.people) for f in frames)
    print(f"ingested {len(frames)} frames ({people} detections) -> {args.out}")
    return 0


def _cmd_track(args) -> int:
    loaded = read_pose_file(args.poses)
    if isinstance(loaded, PoseSequence):
        raise DataError(f"{args.poses} is already a single-person sequence")
    cfg = TrackerConfig(max_jump=args.max_jump, selection_rule=args.selection)
    seq, report = select_person(loaded.frames, cfg, loaded.width, loaded.height)
    write_sequence(seq, args.out)
    print(f"tracked person {report.chosen_initial_index}: "
          f"{report.total_frames} frames, {len(report.carried_frames)} carried "
          f"-> {args.out}")
    return 0


def _cmd_train(args) -> int:
    hyper = _load_hyper(args)
    sequences = [_normalized(read_sequence(p)) for p in args.poses]
    pairs = make_windows(sequences, hyper.window_length)
    first = read_pose_file(args.poses[0])
    ckpt, records = train(pairs, hyper, norm_size=(first.width, first.height))
    save_checkpoint(ckpt, args.out)
    if args.curve is not None:
        export_curve(records, args.curve)
    last = records[-1]
    print(f"epochs={last.epoch + 1}")
    print(f"train_rmse={last.train_rmse!r}")
    print(f"val_rmse={last.val_rmse!r}")
    return 0


def _cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    seq = _normalized(read_sequence(args.poses))
    windows, indices = _eligible_windows(seq, ckpt.hyper.window_length)
    preds = predict_windows(ckpt.params, windows)
    out_seq = PoseSequence(array_to_frames(preds, indices),
                           seq.width, seq.height, NORMALIZED)
    write_sequence(out_seq, args.out)
    print(f"predicted {preds.shape[0]} frames -> {args.out}")
    return 0


def _cmd_generate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    seq = _normalized(read_sequence(args.poses))
    w = ckpt.hyper.window_length
    arr = sequence_to_array(seq)
    if arr.shape[0] < w:
        raise DataError(
            f"sequence of length {arr.shape[0]} is shorter than the window ({w})"
        )
    rolled = generate(arr[-w:], args.horizon, ckpt.params)
    start = seq.frames[-1].frame_index + 1
    indices = range(start, start + args.horizon)
    out_seq = PoseSequence(array_to_frames(rolled, indices),
                           seq.width, seq.height, NORMALIZED)
    write_sequence(out_seq, args.out)
    print(f"generated {args.horizon} frames -> {args.out}")
    return 0


def _cmd_render(args) -> int:
    seq = read_sequence(args.poses)
    if seq.space == NORMALIZED and seq.width > 0 and seq.height > 0:
        from .normalize import denormalize

        seq = denormalize(seq, seq.width, seq.height)
    style = RenderStyle(width=args.width, height=args.height)
    paths = render_sequence(seq, style, args.out, overwrite=args.overwrite)
    print(f"rendered {len(paths)} frames -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    seq = _normalized(read_sequence(args.poses))
    hyper = ckpt.hyper
    pairs = make_windows([seq], hyper.window_length)
    train_pairs, val_pairs = split_pairs(pairs, hyper, ckpt.seed)
    if not val_pairs:
        val_pairs = train_pairs

    def _rmse(subset):
        win = np.stack([p.window for p in subset])
        tgt = np.stack([p.target for p in subset])
        msk = np.stack([p.target_mask for p in subset]) if hyper.mask_missing else None
        return evaluate_rmse(ckpt.params, win, tgt, msk)

    print(f"train_rmse={_rmse(train_pairs)!r}")
    print(f"val_rmse={_rmse(val_pairs)!r}")
    print(f"overall_rmse={_rmse(pairs)!r}")
    print(f"persistence_rmse={persistence_baseline(seq, hyper.window_length)!r}")
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "track": _cmd_track,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "generate": _cmd_generate,
    "render": _cmd_render,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
