"""Pose-sequence prediction toolkit.

Ingests multi-person OpenPose keypoint output, isolates a single
performer, trains an LSTM next-frame pose predictor from scratch,
generates motion autoregressively, and renders stick-figure frames for
image-synthesis pipelines.
"""

from .errors import DataError, NumericalError
from .pose import (
    Keypoint,
    PoseFrame,
    PoseSequence,
    PoseVector,
    frame_to_vector,
    vector_to_frame,
)

__all__ = [
    "DataError",
    "NumericalError",
    "Keypoint",
    "PoseFrame",
    "PoseSequence",
    "PoseVector",
    "frame_to_vector",
    "vector_to_frame",
]

__version__ = "0.1.0"
