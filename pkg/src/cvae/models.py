"""Records exchanged with the conditional VAE."""

from typing import TypeAlias

from typing_extensions import Self

import torch
from pydantic import BaseModel, ConfigDict, model_validator

from src.common.models import ContextMode, HyperParams

CHECKPOINT_VERSION = "cavae-v1"

# concat(agent embedding, tanh(W_ctx . poi_context)), shape (d_agent + d_ctx,) or batched (B, d_agent + d_ctx)
ContextVector: TypeAlias = torch.Tensor


class LatentPosterior(BaseModel):
    """Diagonal Gaussian q(z | x, c); logvar is already clamped to [-10, 10]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu: torch.Tensor
    logvar: torch.Tensor

    @property
    def std(self) -> torch.Tensor:
        return torch.exp(0.5 * self.logvar)


class ScoreRecord(BaseModel):
    subtraj_id: int
    agent_id: str
    recon_loglik: float
    score: float

    @model_validator(mode="after")
    def score_is_complement(self) -> Self:
        if self.score != 1.0 - self.recon_loglik:
            raise ValueError("score must equal 1 - recon_loglik")
        return self

    @classmethod
    def from_loglik(cls, subtraj_id: int, agent_id: str, recon_loglik: float) -> "ScoreRecord":
        score = 1.0 - recon_loglik
        return cls(subtraj_id=subtraj_id, agent_id=agent_id, recon_loglik=recon_loglik, score=score)


class Batch(BaseModel):
    """Padded tensors for a group of sequences. Padding positions hold token -1."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    tokens: torch.Tensor  # (B, T) int64
    lengths: torch.Tensor  # (B,) int64
    agent_idx: torch.Tensor  # (B,) int64, 0 = unknown agent
    poi: torch.Tensor  # (B, poi_dim) float64

    def __len__(self) -> int:
        return int(self.tokens.shape[0])

    def select(self, index: torch.Tensor) -> "Batch":
        lengths = self.lengths[index]
        width = int(lengths.max())
        return Batch(
            tokens=self.tokens[index, :width],
            lengths=lengths,
            agent_idx=self.agent_idx[index],
            poi=self.poi[index],
        )


class EpochLoss(BaseModel):
    epoch: int
    loss: float
    recon_loglik: float
    kl: float


class TensorSpec(BaseModel):
    name: str
    shape: list[int]


class CheckpointHeader(BaseModel):
    version: str = CHECKPOINT_VERSION
    hyperparams: HyperParams
    vocab_size: int
    poi_dim: int
    mode: ContextMode
    seed: int
    agent_table: dict[str, int]  # agent_id -> embedding row (row 0 is the unknown agent)
    tensors: list[TensorSpec]
