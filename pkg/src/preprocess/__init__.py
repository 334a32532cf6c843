"""Trajectory preprocessing: stay points, partitioning, grid tokens."""

from src.preprocess.core import (
    detect_stay_points,
    load_trajectories,
    partition,
    preprocess_corpus,
    read_dataset,
    split_time,
    tokenize,
    write_dataset,
)
from src.preprocess.models import (
    CorpusStats,
    GpsFix,
    RawTrajectory,
    SkippedSubtrajectory,
    SplitStats,
    Subtrajectory,
    TokenDataset,
    TokenSequence,
)

__all__ = [
    "detect_stay_points",
    "load_trajectories",
    "partition",
    "preprocess_corpus",
    "read_dataset",
    "split_time",
    "tokenize",
    "write_dataset",
    "CorpusStats",
    "GpsFix",
    "RawTrajectory",
    "SkippedSubtrajectory",
    "SplitStats",
    "Subtrajectory",
    "TokenDataset",
    "TokenSequence",
]
