"""Results of the end-to-end stages."""

from pydantic import BaseModel, ConfigDict

from src.common.models import ContextMode
from src.cvae import ContextAwareVAE, EpochLoss, ScoreRecord
from src.poi import ClusterModel, GridVectors
from src.scoring import AblationReport, AgentScore, PrCurve


class PoiContext(BaseModel):
    """POI-derived inputs shared by every context mode."""

    clusters: ClusterModel
    contextual: GridVectors  # counts per cluster
    categories: GridVectors  # counts per raw category


class ModeResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mode: ContextMode
    model: ContextAwareVAE
    agent_table: dict[str, int]
    trace: list[EpochLoss]
    scores: list[ScoreRecord]
    agent_scores: list[AgentScore]
    curve: PrCurve | None = None  # None without usable labels


class AblationResult(BaseModel):
    report: AblationReport
    results: dict[ContextMode, ModeResult]
