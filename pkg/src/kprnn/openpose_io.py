"""OpenPose per-frame JSON ingestion.

Each OpenPose output file is one video frame: a top-level object with a
"people" array, each person carrying "pose_keypoints_2d" - a flat list
of 75 numbers laid out x0,y0,c0,...,x24,y24,c24 in raw pixel space.
Only the 2D body model is read; face/hand keys are ignored.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

from .errors import DataError
from .pose import NUM_KEYPOINTS, Keypoint, PoseFrame

FLAT_LEN = 3 * NUM_KEYPOINTS

# Matches the trailing digit run in names like "clip_000000000042_keypoints.json".
DEFAULT_PATTERN = r".*?(\d+)\D*\.json"


@dataclass(frozen=True)
class MultiPersonFrame:
    """All detections for one video frame (possibly none)."""

    frame_index: int
    people: tuple

    def __post_init__(self):
        object.__setattr__(self, "people", tuple(self.people))
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")
        for pose in self.people:
            if pose.frame_index != self.frame_index:
                raise ValueError(
                    f"person stamped with frame {pose.frame_index} inside frame "
                    f"{self.frame_index}"
                )


def parse_frame(text: str, frame_index: int) -> MultiPersonFrame:
    """Parse one OpenPose JSON document into a MultiPersonFrame.

    Undetected joints (confidence 0) are forced to (0, 0) per the
    OpenPose convention; a confidence outside [0, 1] is rejected with a
    diagnostic naming the offending person.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"frame {frame_index}: malformed JSON ({exc})") from exc
    if not isinstance(doc, dict) or "people" not in doc:
        raise DataError(f"frame {frame_index}: missing 'people' key")
    people_raw = doc["people"]
    if not isinstance(people_raw, list):
        raise DataError(f"frame {frame_index}: 'people' is not an array")

    people = []
    for p, person in enumerate(people_raw):
        if not isinstance(person, dict) or "pose_keypoints_2d" not in person:
            raise DataError(
                f"frame {frame_index}: person {p} has no 'pose_keypoints_2d'"
            )
        flat = person["pose_keypoints_2d"]
        if not isinstance(flat, list) or len(flat) != FLAT_LEN:
            raise DataError(
                f"frame {frame_index}: person {p} 'pose_keypoints_2d' must hold "
                f"{FLAT_LEN} numbers, got {len(flat) if isinstance(flat, list) else type(flat).__name__}"
            )
        for v in flat:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise DataError(
                    f"frame {frame_index}: person {p} has a non-numeric keypoint entry "
                    f"{v!r}"
                )
        keypoints = []
        for i in range(NUM_KEYPOINTS):
            x, y, c = flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]
            if not 0.0 <= c <= 1.0:
                raise DataError(
                    f"frame {frame_index}: person {p} joint {i} confidence {c} "
                    f"outside [0, 1]"
                )
            if c == 0:
                # OpenPose emits (0, 0, 0) for undetected joints; coerce any
                # stray coordinates so the missing-keypoint invariant holds.
                keypoints.append(Keypoint(0.0, 0.0, 0.0) if (x != 0 or y != 0)
                                 else Keypoint(x, y, c))
            else:
                keypoints.append(Keypoint(x, y, c))
        people.append(PoseFrame(tuple(keypoints), frame_index))
    return MultiPersonFrame(frame_index, tuple(people))


def serialize_frame(frame: MultiPersonFrame) -> str:
    """Serialize back to the OpenPose per-frame schema (compact JSON)."""
    doc = {
        "people": [
            {
                "pose_keypoints_2d": [
                    v for kp in pose.keypoints for v in (kp.x, kp.y, kp.c)
                ]
            }
            for pose in frame.people
        ]
    }
    return json.dumps(doc, separators=(",", ":"))


def load_sequence(directory, pattern: str = DEFAULT_PATTERN,
                  allow_gaps: bool = False) -> list:
    """Load every per-frame JSON file in a directory, ordered by frame number.

    ``pattern`` is a regular expression matched against each filename; its
    single capture group extracts the integer frame number.  Frame numbers
    must be consecutive unless ``allow_gaps`` is set, in which case the
    captured indices are kept as-is.
    """
    if not os.path.isdir(directory):
        raise DataError(f"not a directory: {directory}")
    try:
        rx = re.compile(pattern)
    except re.error as exc:
        raise DataError(f"bad filename pattern {pattern!r}: {exc}") from exc
    if rx.groups != 1:
        raise DataError("filename pattern must have exactly one capture group")

    numbered = []
    for name in os.listdir(directory):
        m = rx.fullmatch(name)
        if m is None:
            continue
        numbered.append((int(m.group(1)), name))
    if not numbered:
        raise DataError(f"no files matching {pattern!r} in {directory}")

    numbered.sort()
    seen = {}
    for idx, name in numbered:
        if idx in seen:
            raise DataError(f"duplicate frame number {idx}: {seen[idx]} and {name}")
        seen[idx] = name
    if not allow_gaps:
        indices = [idx for idx, _ in numbered]
        for prev, cur in zip(indices, indices[1:]):
            if cur != prev + 1:
                raise DataError(
                    f"gap in frame numbers: missing frame {prev + 1} "
                    f"(pass allow_gaps to accept)"
                )

    frames = []
    for idx, name in numbered:
        path = os.path.join(directory, name)
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        frames.append(parse_frame(text, idx))
    return frames
