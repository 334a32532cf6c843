"""Context-aware conditional VAE over grid-token sequences."""

from src.cvae.checkpoint import load_checkpoint, read_header, save_checkpoint
from src.cvae.context import ContextBuilder, ablation_context, agent_table
from src.cvae.core import (
    anomaly_score,
    decode_loglik,
    elbo_loss,
    encode,
    read_scores,
    recon_loglik_mc,
    reparameterize,
    score_sequences,
    sequence_generator,
    write_scores,
)
from src.cvae.models import (
    CHECKPOINT_VERSION,
    Batch,
    CheckpointHeader,
    ContextVector,
    EpochLoss,
    LatentPosterior,
    ScoreRecord,
)
from src.cvae.network import ContextAwareVAE, kl_to_standard_normal
from src.cvae.train import TrainResult, build_model, train

__all__ = [
    "load_checkpoint",
    "read_header",
    "save_checkpoint",
    "ContextBuilder",
    "ablation_context",
    "agent_table",
    "anomaly_score",
    "decode_loglik",
    "elbo_loss",
    "encode",
    "read_scores",
    "recon_loglik_mc",
    "reparameterize",
    "score_sequences",
    "sequence_generator",
    "write_scores",
    "CHECKPOINT_VERSION",
    "Batch",
    "CheckpointHeader",
    "ContextVector",
    "EpochLoss",
    "LatentPosterior",
    "ScoreRecord",
    "ContextAwareVAE",
    "kl_to_standard_normal",
    "TrainResult",
    "build_model",
    "train",
]
