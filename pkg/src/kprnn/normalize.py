"""Conversion between raw pixel coordinates and the unit square.

The network's sigmoid output layer confines predictions to (0, 1), so
training targets must live there too: x' = x / width, y' = y / height.
Missing keypoints stay at (0, 0, 0) - the network learns (0, 0) as the
"absent" code unless loss masking is enabled in the trainer.

Note on error units: all RMSE numbers this package reports are computed
in these normalized coordinates unless stated otherwise.
"""

from __future__ import annotations

from typing import NamedTuple

from .pose import NORMALIZED, RAW_PIXELS, Keypoint, PoseFrame, PoseSequence


class NormalizeResult(NamedTuple):
    sequence: PoseSequence
    clamped: int


def normalize(seq: PoseSequence) -> NormalizeResult:
    """Map a raw-pixel sequence into the unit square.

    Coordinates outside [0, width] x [0, height] are clamped; the number
    of clamped values is returned alongside the converted sequence.
    """
    if seq.space != RAW_PIXELS:
        raise ValueError(f"normalize expects a raw-pixel sequence, got {seq.space!r}")
    if not (seq.width > 0 and seq.height > 0):
        raise ValueError(
            f"frame dimensions must be positive, got {seq.width}x{seq.height}"
        )
    w = float(seq.width)
    h = float(seq.height)
    clamped = 0
    frames = []
    for frame in seq.frames:
        kps = []
        for kp in frame.keypoints:
            if kp.missing:
                kps.append(kp)
                continue
            x, y = float(kp.x), float(kp.y)
            if x < 0.0 or x > w:
                x = min(max(x, 0.0), w)
                clamped += 1
            if y < 0.0 or y > h:
                y = min(max(y, 0.0), h)
                clamped += 1
            kps.append(Keypoint(x / w, y / h, kp.c))
        frames.append(PoseFrame(tuple(kps), frame.frame_index))
    return NormalizeResult(
        PoseSequence(tuple(frames), seq.width, seq.height, NORMALIZED), clamped
    )


def denormalize(seq: PoseSequence, width: float, height: float) -> PoseSequence:
    """Map a normalized sequence back onto a width x height pixel frame."""
    if seq.space != NORMALIZED:
        raise ValueError(f"denormalize expects a normalized sequence, got {seq.space!r}")
    if not (width > 0 and height > 0):
        raise ValueError(f"frame dimensions must be positive, got {width}x{height}")
    w = float(width)
    h = float(height)
    frames = []
    for frame in seq.frames:
        kps = [
            kp if kp.missing else Keypoint(kp.x * w, kp.y * h, kp.c)
            for kp in frame.keypoints
        ]
        frames.append(PoseFrame(tuple(kps), frame.frame_index))
    return PoseSequence(tuple(frames), width, height, RAW_PIXELS)
