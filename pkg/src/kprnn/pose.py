"""Core pose data types.

A pose is 25 BODY_25 keypoints, each an (x, y, confidence) triple.
Confidence 0 together with x = y = 0 marks an undetected ("missing")
joint, following the OpenPose output convention.  Poses live either in
raw pixel coordinates or in the unit square ("normalized" space); the
network consumes the normalized flat 50-vector layout x0,y0,x1,y1,...
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NUM_KEYPOINTS = 25
VECTOR_SIZE = 2 * NUM_KEYPOINTS

RAW_PIXELS = "raw_pixels"
NORMALIZED = "normalized"
SPACES = (RAW_PIXELS, NORMALIZED)

# BODY_25 joint order.
JOINT_NAMES = (
    "nose", "neck",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow", "l_wrist",
    "mid_hip",
    "r_hip", "r_knee", "r_ankle",
    "l_hip", "l_knee", "l_ankle",
    "r_eye", "l_eye", "r_ear", "l_ear",
    "l_big_toe", "l_small_toe", "l_heel",
    "r_big_toe", "r_small_toe", "r_heel",
)


@dataclass(frozen=True)
class Keypoint:
    """One detected joint: coordinates plus detection confidence."""

    x: float
    y: float
    c: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"confidence {self.c} outside [0, 1]")
        if self.c == 0.0 and (self.x != 0.0 or self.y != 0.0):
            raise ValueError(
                f"missing keypoint (c=0) must sit at (0, 0), got ({self.x}, {self.y})"
            )

    @property
    def missing(self) -> bool:
        return self.c == 0.0


MISSING_KEYPOINT = Keypoint(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PoseFrame:
    """Exactly 25 keypoints for one person in one video frame."""

    keypoints: tuple
    frame_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        if len(self.keypoints) != NUM_KEYPOINTS:
            raise ValueError(
                f"pose frame needs exactly {NUM_KEYPOINTS} keypoints, got {len(self.keypoints)}"
            )
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")

    def at_index(self, frame_index: int) -> "PoseFrame":
        """Same pose re-stamped with a different frame index."""
        return PoseFrame(self.keypoints, frame_index)


@dataclass(frozen=True)
class PoseSequence:
    """A time-ordered single-person pose track plus its frame geometry."""

    frames: tuple
    width: float
    height: float
    space: str = RAW_PIXELS

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValueError("pose sequence must contain at least one frame")
        if self.space not in SPACES:
            raise ValueError(f"unknown coordinate space {self.space!r}")
        prev = -1
        for frame in self.frames:
            if frame.frame_index <= prev:
                raise ValueError(
                    f"frame indices must be strictly increasing "
                    f"({frame.frame_index} after {prev})"
                )
            prev = frame.frame_index
        if self.space == NORMALIZED:
            for frame in self.frames:
                for i, kp in enumerate(frame.keypoints):
                    if kp.missing:
                        continue
                    if not (0.0 <= kp.x <= 1.0 and 0.0 <= kp.y <= 1.0):
                        raise ValueError(
                            f"normalized frame {frame.frame_index} joint {i} "
                            f"outside the unit square: ({kp.x}, {kp.y})"
                        )

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class PoseVector:
    """Flat 50-number network encoding: x0,y0,x1,y1,...,x24,y24, all in [0, 1]."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != VECTOR_SIZE:
            raise ValueError(
                f"pose vector needs exactly {VECTOR_SIZE} values, got {len(self.values)}"
            )
        for i, v in enumerate(self.values):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"pose vector element {i} outside [0, 1]: {v}")

    def to_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "PoseVector":
        return cls(tuple(float(v) for v in np.asarray(arr).ravel()))


def frame_to_vector(frame: PoseFrame) -> PoseVector:
    """Flatten a normalized pose frame into the 50-vector layout.

    Confidence is dropped; it has no slot in the network encoding.
    Raises ValueError if any coordinate falls outside the unit square
    (i.e. the frame is not in normalized space).
    """
    values = []
    for i, kp in enumerate(frame.keypoints):
        if not (0.0 <= kp.x <= 1.0 and 0.0 <= kp.y <= 1.0):
            raise ValueError(
                f"joint {i} at ({kp.x}, {kp.y}) is not in normalized space"
            )
        values.append(kp.x)
        values.append(kp.y)
    return PoseVector(tuple(values))


def vector_to_frame(vector: PoseVector, frame_index: int = 0) -> PoseFrame:
    """Inverse of frame_to_vector.

    Predicted frames carry no confidence, so every keypoint gets c = 1.
    """
    vals = vector.values
    keypoints = tuple(
        Keypoint(vals[2 * i], vals[2 * i + 1], 1.0) for i in range(NUM_KEYPOINTS)
    )
    return PoseFrame(keypoints, frame_index)


def sequence_to_array(seq: PoseSequence) -> np.ndarray:
    """(L, 50) float64 coordinate matrix in the flat vector layout."""
    out = np.empty((len(seq.frames), VECTOR_SIZE), dtype=np.float64)
    for r, frame in enumerate(seq.frames):
        for i, kp in enumerate(frame.keypoints):
            out[r, 2 * i] = kp.x
            out[r, 2 * i + 1] = kp.y
    return out


def sequence_detection_mask(seq: PoseSequence) -> np.ndarray:
    """(L, 50) matrix with 1.0 where the joint was detected, 0.0 where missing."""
    out = np.zeros((len(seq.frames), VECTOR_SIZE), dtype=np.float64)
    for r, frame in enumerate(seq.frames):
        for i, kp in enumerate(frame.keypoints):
            if not kp.missing:
                out[r, 2 * i] = 1.0
                out[r, 2 * i + 1] = 1.0
    return out


def array_to_frames(arr, frame_indices) -> tuple:
    """Turn an (N, 50) coordinate matrix into PoseFrames with c = 1 everywhere."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != VECTOR_SIZE:
        raise ValueError(f"expected an (N, {VECTOR_SIZE}) array, got {arr.shape}")
    if len(frame_indices) != arr.shape[0]:
        raise ValueError("frame_indices length does not match array rows")
    frames = []
    for row, idx in zip(arr, frame_indices):
        keypoints = tuple(
            Keypoint(float(row[2 * i]), float(row[2 * i + 1]), 1.0)
            for i in range(NUM_KEYPOINTS)
        )
        frames.append(PoseFrame(keypoints, int(idx)))
    return tuple(frames)
