"""Single-person selection from multi-person frame streams.

Greedy nearest-pose matching: anchor on one person in the first populated
frame, then follow whichever detection sits closest to the last accepted
pose.  Frames with no usable candidate (empty, no shared joints, or a
centroid jump beyond the threshold) repeat the last accepted pose, and
those frame indices are reported so downstream stages can drop them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .pose import RAW_PIXELS, PoseFrame, PoseSequence

SELECTION_HIGHEST_CONFIDENCE = "highest_confidence"


@dataclass(frozen=True)
class TrackerConfig:
    """max_jump is a fraction of the frame diagonal; selection_rule is
    "highest_confidence" or "index_<k>" for a fixed person index."""

    max_jump: float = 0.2
    selection_rule: str = SELECTION_HIGHEST_CONFIDENCE

    def __post_init__(self):
        if not self.max_jump > 0:
            raise ValueError(f"max_jump must be positive, got {self.max_jump}")
        _parse_rule(self.selection_rule)


@dataclass(frozen=True)
class TrackReport:
    chosen_initial_index: int
    carried_frames: tuple
    total_frames: int


def _parse_rule(rule: str):
    if rule == SELECTION_HIGHEST_CONFIDENCE:
        return None
    if rule.startswith("index_"):
        try:
            k = int(rule[len("index_"):])
        except ValueError:
            raise ValueError(f"bad selection rule {rule!r}") from None
        if k < 0:
            raise ValueError(f"selection index must be non-negative, got {k}")
        return k
    raise ValueError(f"bad selection rule {rule!r}")


def _as_matrix(pose: PoseFrame) -> np.ndarray:
    return np.array([[kp.x, kp.y, kp.c] for kp in pose.keypoints], dtype=np.float64)


def _mean_confidence(mat: np.ndarray) -> float:
    present = mat[:, 2] > 0
    if not present.any():
        return 0.0
    return float(mat[present, 2].mean())


def _centroid(mat: np.ndarray):
    present = mat[:, 2] > 0
    if not present.any():
        return None
    return mat[present, :2].mean(axis=0)


def _mean_distance(a: np.ndarray, b: np.ndarray) -> float:
    shared = (a[:, 2] > 0) & (b[:, 2] > 0)
    if not shared.any():
        return math.inf
    d = a[shared, :2] - b[shared, :2]
    return float(np.sqrt((d * d).sum(axis=1)).mean())


def select_person(frames, cfg: TrackerConfig, width: float, height: float):
    """Reduce multi-person frames to one identity-consistent pose track.

    Returns (PoseSequence in raw pixel space, TrackReport).  Output length
    always equals input length; frames where the pose had to be carried
    forward (including any empty frames before the anchor, which repeat
    the anchor pose) are listed in the report.
    """
    frames = list(frames)
    if not frames:
        raise DataError("no frames to track")

    anchor_pos = next((i for i, f in enumerate(frames) if f.people), None)
    if anchor_pos is None:
        raise DataError("every frame is empty of people")

    index_rule = _parse_rule(cfg.selection_rule)
    anchor_frame = frames[anchor_pos]
    if index_rule is None:
        best = None
        chosen = 0
        for j, person in enumerate(anchor_frame.people):
            conf = _mean_confidence(_as_matrix(person))
            if best is None or conf > best:
                best = conf
                chosen = j
    else:
        if index_rule >= len(anchor_frame.people):
            raise DataError(
                f"selection rule index_{index_rule} but anchor frame "
                f"{anchor_frame.frame_index} has only {len(anchor_frame.people)} people"
            )
        chosen = index_rule

    diagonal = math.hypot(width, height)
    jump_limit = cfg.max_jump * diagonal

    current = _as_matrix(anchor_frame.people[chosen])
    out_frames = []
    carried = []

    # Empty leading frames repeat the anchor pose so output covers every frame.
    anchor_pose = anchor_frame.people[chosen]
    for f in frames[:anchor_pos]:
        out_frames.append(anchor_pose.at_index(f.frame_index))
        carried.append(f.frame_index)
    out_frames.append(anchor_pose.at_index(anchor_frame.frame_index))

    for f in frames[anchor_pos + 1:]:
        picked = None
        if f.people:
            best_dist = math.inf
            best_j = None
            for j, person in enumerate(f.people):
                d = _mean_distance(_as_matrix(person), current)
                if d < best_dist:
                    best_dist = d
                    best_j = j
            if best_j is not None and math.isfinite(best_dist):
                cand = _as_matrix(f.people[best_j])
                c_new = _centroid(cand)
                c_old = _centroid(current)
                if c_new is not None and c_old is not None:
                    if float(np.hypot(*(c_new - c_old))) <= jump_limit:
                        picked = f.people[best_j]
                        current = cand
        if picked is None:
            carried.append(f.frame_index)
            out_frames.append(out_frames[-1].at_index(f.frame_index))
        else:
            out_frames.append(picked.at_index(f.frame_index))

    seq = PoseSequence(tuple(out_frames), width, height, RAW_PIXELS)
    report = TrackReport(chosen, tuple(carried), len(frames))
    return seq, report
