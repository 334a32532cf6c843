"""Main entrypoint. Exposes the public API."""

from src.common.models import ContextMode, GridSpec, HyperParams, RunConfig, SimConfig
from src.cvae import ContextAwareVAE, anomaly_score, load_checkpoint, save_checkpoint, score_sequences, train
from src.pipeline import build_poi_context, run_ablation, run_mode
from src.preprocess import TokenDataset, preprocess_corpus
from src.scoring import agent_level, pr_curve
from src.simulate import simulate

__all__ = [
    "ContextMode",
    "GridSpec",
    "HyperParams",
    "RunConfig",
    "SimConfig",
    "ContextAwareVAE",
    "anomaly_score",
    "load_checkpoint",
    "save_checkpoint",
    "score_sequences",
    "train",
    "build_poi_context",
    "run_ablation",
    "run_mode",
    "TokenDataset",
    "preprocess_corpus",
    "agent_level",
    "pr_curve",
    "simulate",
]
