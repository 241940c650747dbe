"""Seeded synthetic pose data for tests, benchmarks and demos.

Two generators live here:

* :func:`sinusoid_sequences` - smooth per-coordinate sinusoidal joint
  motion in normalized space, used as a stand-in for motion-capture
  footage wherever real OpenPose output is unavailable.
* :func:`two_person_scene` - raw-pixel multi-person frames with two
  well-separated subjects and known ground-truth identity, used to
  exercise the tracker.

Both are pure functions of their arguments (numpy PCG64 streams).
"""

from __future__ import annotations

import numpy as np

from .openpose_io import MultiPersonFrame
from .pose import (
    NORMALIZED,
    NUM_KEYPOINTS,
    VECTOR_SIZE,
    Keypoint,
    PoseFrame,
    PoseSequence,
)


def sinusoid_sequences(num_sequences: int = 10, num_frames: int = 300,
                       seed: int = 0, width: float = 1280, height: float = 720,
                       period: float = 12.0,
                       min_amplitude: float = 0.25, max_amplitude: float = 0.48):
    """Normalized sequences of a periodic whole-body motion loop.

    Models one performer repeating a movement loop: every coordinate k
    keeps a fixed amplitude, center and phase offset across sequences
    (drawn once from the seed), while each sequence starts the loop at
    its own random phase.  Coordinate k of a sequence with phase p is

        center_k + amp_k * sin(2*pi*t / period + p + offset_k)

    with all values strictly inside (0, 1) and confidence 1 everywhere.
    The default period (12 frames, i.e. 2.5 Hz at 30 fps) gives brisk,
    clearly non-static motion.
    """
    rng = np.random.default_rng(seed)
    amp = rng.uniform(min_amplitude, max_amplitude, VECTOR_SIZE)
    center = rng.uniform(amp + 0.02, 1.0 - amp - 0.02)
    offset = rng.uniform(0.0, 2.0 * np.pi, VECTOR_SIZE)
    sequences = []
    for _ in range(num_sequences):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        t = np.arange(num_frames)[:, None]
        values = center + amp * np.sin(2.0 * np.pi * t / period + phase + offset)
        frames = []
        for fi in range(num_frames):
            row = values[fi]
            kps = tuple(
                Keypoint(float(row[2 * j]), float(row[2 * j + 1]), 1.0)
                for j in range(NUM_KEYPOINTS)
            )
            frames.append(PoseFrame(kps, fi))
        sequences.append(PoseSequence(tuple(frames), width, height, NORMALIZED))
    return sequences


# Rough humanoid joint offsets (pixels) around the body centroid, in
# BODY_25 order; zero-mean-ish so the pose centroid tracks the walk.
_SKELETON_OFFSETS = np.array([
    (0, -150),            # nose
    (0, -110),            # neck
    (-35, -110), (-45, -60), (-50, -10),   # right arm
    (35, -110), (45, -60), (50, -10),      # left arm
    (0, 0),               # mid hip
    (-20, 0), (-22, 70), (-24, 140),       # right leg
    (20, 0), (22, 70), (24, 140),          # left leg
    (-8, -158), (8, -158), (-18, -150), (18, -150),  # eyes, ears
    (30, 152), (38, 150), (18, 146),       # left foot
    (-30, 152), (-38, 150), (-18, 146),    # right foot
], dtype=np.float64)


def _person_pose(center, conf: float, frame_index: int) -> PoseFrame:
    pts = center + _SKELETON_OFFSETS
    kps = tuple(Keypoint(float(x), float(y), conf) for x, y in pts)
    return PoseFrame(kps, frame_index)


def two_person_scene(num_frames: int = 60, width: float = 1280,
                     height: float = 720, seed: int = 0,
                     empty_frames=(), step: float = 4.0):
    """Two subjects random-walking in disjoint horizontal bands.

    The target person (confidence 0.9) stays in the left quarter of the
    frame, the distractor (confidence 0.6) in the right quarter, keeping
    their centroids far apart at all times.  Person order within each
    frame is shuffled.  Frames listed in ``empty_frames`` contain no
    detections.

    Returns (frames, truth) where ``truth[i]`` is the target person's
    PoseFrame at frame i, or None for an empty frame.
    """
    rng = np.random.default_rng(seed)
    empty = set(empty_frames)

    def clamp(p, lo, hi):
        return np.minimum(np.maximum(p, lo), hi)

    a_lo = np.array([0.15 * width, 0.45 * height])
    a_hi = np.array([0.25 * width, 0.55 * height])
    b_lo = np.array([0.75 * width, 0.45 * height])
    b_hi = np.array([0.85 * width, 0.55 * height])
    pos_a = rng.uniform(a_lo, a_hi)
    pos_b = rng.uniform(b_lo, b_hi)

    frames = []
    truth = []
    for fi in range(num_frames):
        pos_a = clamp(pos_a + rng.uniform(-step, step, 2), a_lo, a_hi)
        pos_b = clamp(pos_b + rng.uniform(-step, step, 2), b_lo, b_hi)
        if fi in empty:
            frames.append(MultiPersonFrame(fi, ()))
            truth.append(None)
            continue
        target = _person_pose(pos_a, 0.9, fi)
        other = _person_pose(pos_b, 0.6, fi)
        people = (other, target) if rng.random() < 0.5 else (target, other)
        frames.append(MultiPersonFrame(fi, people))
        truth.append(target)
    return frames, truth
