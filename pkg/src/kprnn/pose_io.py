"""Versioned JSON envelope for intermediate pose files.

All pipeline stages after ingest exchange one schema:

    {"format": "kpseq/1", "width": W, "height": H, "space": S, "frames": [...]}

Single-person files store ``{"frame_index": i, "keypoints": [[x,y,c] * 25]}``
per frame; multi-person files (the ingest output) store
``{"frame_index": i, "people": [[[x,y,c] * 25], ...]}`` and are always in
raw pixel space.  Files round-trip losslessly: floats are written with
their shortest exact decimal representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DataError
from .openpose_io import MultiPersonFrame
from .pose import NUM_KEYPOINTS, RAW_PIXELS, SPACES, Keypoint, PoseFrame, PoseSequence

FORMAT_TAG = "kpseq/1"


@dataclass(frozen=True)
class MultiPersonSequence:
    """Ingest output: per-frame multi-person detections plus frame geometry."""

    frames: tuple
    width: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))


def _keypoint_triples(pose: PoseFrame) -> list:
    return [[kp.x, kp.y, kp.c] for kp in pose.keypoints]


def _pose_from_triples(triples, frame_index: int, where: str) -> PoseFrame:
    if not isinstance(triples, list) or len(triples) != NUM_KEYPOINTS:
        raise DataError(f"{where}: expected {NUM_KEYPOINTS} keypoint triples")
    kps = []
    for i, t in enumerate(triples):
        if not isinstance(t, list) or len(t) != 3:
            raise DataError(f"{where}: joint {i} is not an [x, y, c] triple")
        try:
            kps.append(Keypoint(t[0], t[1], t[2]))
        except ValueError as exc:
            raise DataError(f"{where}: joint {i}: {exc}") from exc
    return PoseFrame(tuple(kps), frame_index)


def write_sequence(seq: PoseSequence, path) -> None:
    doc = {
        "format": FORMAT_TAG,
        "width": seq.width,
        "height": seq.height,
        "space": seq.space,
        "frames": [
            {"frame_index": f.frame_index, "keypoints": _keypoint_triples(f)}
            for f in seq.frames
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def write_multi(ms: MultiPersonSequence, path) -> None:
    doc = {
        "format": FORMAT_TAG,
        "width": ms.width,
        "height": ms.height,
        "space": RAW_PIXELS,
        "frames": [
            {
                "frame_index": f.frame_index,
                "people": [_keypoint_triples(p) for p in f.people],
            }
            for f in ms.frames
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def read_pose_file(path):
    """Load a pose envelope; returns a PoseSequence or a MultiPersonSequence."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise DataError(f"{path}: not a {FORMAT_TAG} pose file")
    for key in ("width", "height", "frames"):
        if key not in doc:
            raise DataError(f"{path}: missing {key!r}")
    frames_raw = doc["frames"]
    if not isinstance(frames_raw, list) or not frames_raw:
        raise DataError(f"{path}: 'frames' must be a non-empty array")

    kinds = {("people" in f) for f in frames_raw if isinstance(f, dict)}
    if len(kinds) != 1:
        raise DataError(f"{path}: frames mix single-person and multi-person records")
    multi = kinds.pop()

    if multi:
        frames = []
        for f in frames_raw:
            idx = f.get("frame_index")
            if not isinstance(idx, int):
                raise DataError(f"{path}: frame without integer frame_index")
            people = tuple(
                _pose_from_triples(p, idx, f"{path} frame {idx} person {j}")
                for j, p in enumerate(f["people"])
            )
            frames.append(MultiPersonFrame(idx, people))
        return MultiPersonSequence(tuple(frames), doc["width"], doc["height"])

    space = doc.get("space")
    if space not in SPACES:
        raise DataError(f"{path}: unknown coordinate space {space!r}")
    frames = []
    for f in frames_raw:
        idx = f.get("frame_index")
        if not isinstance(idx, int):
            raise DataError(f"{path}: frame without integer frame_index")
        frames.append(_pose_from_triples(f["keypoints"], idx, f"{path} frame {idx}"))
    try:
        return PoseSequence(tuple(frames), doc["width"], doc["height"], space)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def read_sequence(path) -> PoseSequence:
    """Load a pose envelope that must contain a single-person sequence."""
    loaded = read_pose_file(path)
    if not isinstance(loaded, PoseSequence):
        raise DataError(
            f"{path}: holds multi-person detections; run the tracker first"
        )
    return loaded
