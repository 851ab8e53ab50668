"""Spatio-temporal human-object interaction detection (C++ core)."""

from ._core import (
    DataError,
    Trajectory,
    ValidationError,
    average_precision,
    config_dump,
    detect,
    detect_trajectories,
    evaluate,
    iou,
    synth,
    track,
    train,
    trajectory_overlap,
    viou,
)

__all__ = [
    "DataError",
    "Trajectory",
    "ValidationError",
    "average_precision",
    "config_dump",
    "detect",
    "detect_trajectories",
    "evaluate",
    "iou",
    "synth",
    "track",
    "train",
    "trajectory_overlap",
    "viou",
]
