"""Trajectory, subtrajectory and token-sequence models."""

from collections.abc import Iterator
from functools import cached_property
from typing import Literal

from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.common.models import GpsPoint, GridSpec, PreprocessConfig, StayPoint

Split = Literal["train", "test"]


class GpsFix(BaseModel):
    """One line of the trajectory JSONL input."""

    agent_id: str
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    t: int = Field(ge=0)

    def point(self) -> GpsPoint:
        return GpsPoint(lat=self.lat, lon=self.lon, t=self.t)


class RawTrajectory(BaseModel):
    """All fixes of one agent, strictly increasing in time."""

    agent_id: str
    points: list[GpsPoint]

    @field_validator("points")
    @staticmethod
    def strictly_increasing(points: list[GpsPoint]) -> list[GpsPoint]:
        for prev, cur in zip(points, points[1:]):
            if cur.t <= prev.t:
                raise ValueError(f"timestamps must be strictly increasing ({prev.t} then {cur.t})")
        return points


class Subtrajectory(BaseModel):
    model_config = ConfigDict(frozen=True)

    agent_id: str
    stays: list[StayPoint] = Field(min_length=2)

    @field_validator("stays")
    @staticmethod
    def arrivals_increasing(stays: list[StayPoint]) -> list[StayPoint]:
        for prev, cur in zip(stays, stays[1:]):
            if cur.t_arrive <= prev.t_arrive:
                raise ValueError("stay arrivals must be strictly increasing")
        return stays


class TokenSequence(BaseModel):
    """Grid-token rendering of one subtrajectory; the unit the VAE reconstructs."""

    model_config = ConfigDict(frozen=True)

    subtraj_id: int
    agent_id: str
    tokens: list[int] = Field(min_length=2)
    t_start: int
    t_end: int
    split: Split = "train"

    @model_validator(mode="after")
    def non_negative_tokens(self) -> Self:
        if min(self.tokens) < 0:
            raise ValueError("token ids must be non-negative")
        return self

    def __len__(self) -> int:
        return len(self.tokens)


class AgentFailure(BaseModel):
    agent_id: str
    error: str


class SkippedSubtrajectory(BaseModel):
    """A subtrajectory dropped because one of its stays lies outside the grid."""

    agent_id: str
    t_start: int
    t_end: int
    error: str


class SplitStats(BaseModel):
    n_agents: int = 0
    n_sequences: int = 0
    min_length: int = 0
    max_length: int = 0

    @property
    def length_range(self) -> str:
        return f"[{self.min_length}, {self.max_length}]"


class CorpusStats(BaseModel):
    """Descriptive statistics of a preprocessed corpus, one column per Table-1 heading."""

    n_agents: int = 0
    n_fixes: int = 0
    n_stays: int = 0
    n_subtrajectories: int = 0
    n_pois: int | None = None
    split_time: int = 0
    train: SplitStats = SplitStats()
    test: SplitStats = SplitStats()
    min_length: int = 0
    max_length: int = 0
    failures: list[AgentFailure] = []
    skipped: list[SkippedSubtrajectory] = []

    @property
    def markdown(self) -> str:
        header = ["#Agents", "#POIs", "#Training Sequences", "#Test Sequences", "Sequence Length"]
        row = [
            str(self.n_agents),
            "-" if self.n_pois is None else str(self.n_pois),
            str(self.train.n_sequences),
            str(self.test.n_sequences),
            f"[{self.min_length}, {self.max_length}]",
        ]
        lines = ["| " + " | ".join(header) + " |", "| " + " | ".join(["---"] * len(header)) + " |"]
        lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"


class TokenDataset(BaseModel):
    """Sequences of a corpus in (agent_id, time) order. Exposes a list-like interface alongside metadata."""

    grid: GridSpec
    config: PreprocessConfig
    sequences: list[TokenSequence]
    stats: CorpusStats = CorpusStats()

    def __getitem__(self, index: int) -> TokenSequence:
        return self.sequences[index]

    def __iter__(self) -> Iterator[TokenSequence]:  # pyright: ignore[reportIncompatibleMethodOverride]
        return iter(self.sequences)

    def __len__(self) -> int:
        return len(self.sequences)

    def split(self, name: Split) -> list[TokenSequence]:
        return [s for s in self.sequences if s.split == name]

    @cached_property
    def agents(self) -> list[str]:
        return sorted({s.agent_id for s in self.sequences})


class DatasetMeta(BaseModel):
    """Companion metadata written next to the dataset JSONL."""

    grid: GridSpec
    config: PreprocessConfig
    stats: CorpusStats
