"""Shared geometric primitives: GPS points, stay points, the grid and its tokens."""

import math
from collections.abc import Iterable
from typing import Protocol, TypeAlias

from typing_extensions import Self

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.common.errors import OutOfBounds

EARTH_RADIUS_M = 6_371_000.0
DEG_TO_M = EARTH_RADIUS_M * math.pi / 180.0  # meters per degree of arc

# Token id of a grid cell: row * n_cols + col
GridToken: TypeAlias = int


class HasLatLon(Protocol):
    @property
    def lat(self) -> float: ...

    @property
    def lon(self) -> float: ...


class GpsPoint(BaseModel):
    """A single GPS fix."""

    model_config = ConfigDict(frozen=True)

    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    t: int = Field(ge=0)  # epoch seconds


class StayPoint(BaseModel):
    """Centroid of consecutive fixes where an agent lingered."""

    model_config = ConfigDict(frozen=True)

    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    t_arrive: int
    t_depart: int

    @model_validator(mode="after")
    def positive_dwell(self) -> Self:
        if self.t_depart <= self.t_arrive:
            raise ValueError(f"stay must have positive dwell, got [{self.t_arrive}, {self.t_depart}]")
        return self

    @property
    def dwell_s(self) -> int:
        return self.t_depart - self.t_arrive


def haversine_m(a: HasLatLon, b: HasLatLon) -> float:
    """Great-circle distance in meters on a sphere of radius `EARTH_RADIUS_M`."""
    lat1, lat2 = math.radians(a.lat), math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def haversine_np(lat1: ArrayLike, lon1: ArrayLike, lat2: ArrayLike, lon2: ArrayLike) -> NDArray[np.float64]:
    """Vectorised `haversine_m` over broadcastable degree arrays."""
    p1, p2 = np.radians(np.asarray(lat1, dtype=np.float64)), np.radians(np.asarray(lat2, dtype=np.float64))
    dlon = np.radians(np.asarray(lon2, dtype=np.float64) - np.asarray(lon1, dtype=np.float64))
    h = np.sin((p2 - p1) / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(1.0, h)))


class GridSpec(BaseModel):
    """Fixed-size square cells over a local equirectangular projection anchored at the SW corner."""

    model_config = ConfigDict(frozen=True)

    origin_lat: float = Field(ge=-90.0, le=90.0)
    origin_lon: float = Field(ge=-180.0, le=180.0)
    cell_size_m: float = Field(gt=0)
    n_rows: int = Field(gt=0)
    n_cols: int = Field(gt=0)

    @property
    def vocab_size(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def _m_per_deg_lon(self) -> float:
        return math.cos(math.radians(self.origin_lat)) * DEG_TO_M

    def project(self, lat: float, lon: float) -> tuple[float, float]:
        """Local (x east, y north) offset from the origin in meters."""
        return (lon - self.origin_lon) * self._m_per_deg_lon, (lat - self.origin_lat) * DEG_TO_M

    def unproject(self, x: float, y: float) -> tuple[float, float]:
        """Inverse of `project`: (lat, lon) for a local offset."""
        return self.origin_lat + y / DEG_TO_M, self.origin_lon + x / self._m_per_deg_lon

    def cell_of(self, lat: float, lon: float) -> tuple[int, int]:
        """(row, col), possibly outside the grid."""
        x, y = self.project(lat, lon)
        return math.floor(y / self.cell_size_m), math.floor(x / self.cell_size_m)

    def contains(self, lat: float, lon: float) -> bool:
        row, col = self.cell_of(lat, lon)
        return 0 <= row < self.n_rows and 0 <= col < self.n_cols

    @classmethod
    def covering(cls, points: Iterable[HasLatLon], cell_size_m: float) -> "GridSpec":
        """Smallest grid anchored at the points' southwest corner that contains every point."""
        pts = list(points)
        if not pts:
            raise ValueError("cannot anchor a grid on an empty point set")
        origin_lat = min(p.lat for p in pts)
        origin_lon = min(p.lon for p in pts)
        unit = cls(origin_lat=origin_lat, origin_lon=origin_lon, cell_size_m=cell_size_m, n_rows=1, n_cols=1)
        rows, cols = zip(*(unit.cell_of(p.lat, p.lon) for p in pts), strict=True)
        return unit.model_copy(update={"n_rows": max(rows) + 1, "n_cols": max(cols) + 1})


def to_token(p: HasLatLon, g: GridSpec) -> GridToken:
    """Grid token of a location. South/west cell edges are inclusive.

    Raises:
        OutOfBounds: if the location falls outside the grid.
    """
    row, col = g.cell_of(p.lat, p.lon)
    if not (0 <= row < g.n_rows and 0 <= col < g.n_cols):
        raise OutOfBounds(p.lat, p.lon, row, col)
    return row * g.n_cols + col


def token_cell(token: GridToken, g: GridSpec) -> tuple[int, int]:
    """(row, col) of a token."""
    if not 0 <= token < g.vocab_size:
        raise ValueError(f"token {token} outside vocabulary of size {g.vocab_size}")
    return divmod(token, g.n_cols)


def cell_center(token: GridToken, g: GridSpec) -> tuple[float, float]:
    """(lat, lon) of the center of a token's cell."""
    row, col = token_cell(token, g)
    return g.unproject((col + 0.5) * g.cell_size_m, (row + 0.5) * g.cell_size_m)
