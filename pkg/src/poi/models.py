"""POI, embedding, cluster and grid count-vector models."""

import math
from typing_extensions import Self

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.common.models import GridToken


class Poi(BaseModel):
    model_config = ConfigDict(frozen=True)

    poi_id: str
    name: str = ""
    category: str
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)


class PoiEmbedding(BaseModel):
    """one_hot(category) ++ distance-weighted neighbor category histogram."""

    model_config = ConfigDict(frozen=True)

    poi_id: str
    vec: list[float]

    @model_validator(mode="after")
    def finite(self) -> Self:
        if not all(math.isfinite(v) for v in self.vec):
            raise ValueError(f"embedding of {self.poi_id} has non-finite entries")
        return self

    @property
    def array(self) -> NDArray[np.float64]:
        return np.asarray(self.vec, dtype=np.float64)


class ClusterModel(BaseModel):
    K: int = Field(ge=2)
    seed: int
    centroids: list[list[float]]
    inertia: float = 0.0
    init_inertia: float = 0.0  # inertia of the k-means++ seeding

    @model_validator(mode="after")
    def consistent(self) -> Self:
        if len(self.centroids) != self.K:
            raise ValueError(f"expected {self.K} centroids, got {len(self.centroids)}")
        if not all(math.isfinite(v) for row in self.centroids for v in row):
            raise ValueError("centroids must be finite")
        return self

    @property
    def array(self) -> NDArray[np.float64]:
        return np.asarray(self.centroids, dtype=np.float64)


class GridPoiVector(BaseModel):
    model_config = ConfigDict(validate_by_name=True, validate_by_alias=True, serialize_by_alias=True)

    token_id: GridToken = Field(alias="token")
    counts: list[int]


class GridVectors(BaseModel):
    """Per-cell POI count vectors. Cells without POIs are absent and read as zeros."""

    labels: list[str]  # what each count position means (cluster id or raw category)
    vectors: dict[GridToken, GridPoiVector] = {}
    skipped: int = 0  # POIs outside the grid

    @property
    def dim(self) -> int:
        return len(self.labels)

    def counts(self, token: GridToken) -> NDArray[np.float64]:
        hit = self.vectors.get(token)
        if hit is None:
            return np.zeros(self.dim, dtype=np.float64)
        return np.asarray(hit.counts, dtype=np.float64)
