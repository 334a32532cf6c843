"""Agent-level scores, precision-recall curves and the ablation table."""

from typing import Literal

from typing_extensions import Self

from pydantic import BaseModel, Field, model_validator

from src.common.models import ContextMode

Flag = Literal["best", "second", ""]


class AgentScore(BaseModel):
    agent_id: str
    score: float
    argmax_subtraj_id: int
    n_subtrajs: int = Field(ge=1)


class PrCurve(BaseModel):
    """One (recall, precision) point per distinct score threshold, highest threshold first."""

    points: list[tuple[float, float]]
    average_precision: float = Field(ge=0.0, le=1.0)
    n_positive: int = 0
    n_agents: int = 0

    @model_validator(mode="after")
    def recall_non_decreasing(self) -> Self:
        recalls = [r for r, _ in self.points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ValueError("recall must be non-decreasing along the curve")
        return self


class AblationRow(BaseModel):
    mode: ContextMode
    average_precision: float | None = None  # None when the mode failed
    flag: Flag = ""
    error: str | None = None


class AblationReport(BaseModel):
    rows: list[AblationRow]

    @property
    def best(self) -> ContextMode | None:
        return next((r.mode for r in self.rows if r.flag == "best"), None)

    def ap(self, mode: ContextMode) -> float | None:
        return next((r.average_precision for r in self.rows if r.mode is mode), None)
