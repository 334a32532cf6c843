"""Synthetic city, agent routine and ground-truth models."""

from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict

from src.common.models import AnomalyKind, GridSpec, GridToken, SimConfig
from src.poi import Poi
from src.preprocess import RawTrajectory


class ZoneKind(Enum):
    RESIDENTIAL = "residential"
    COMMERCIAL = "commercial"
    CAMPUS = "campus"
    AIRPORT = "airport"


class Zone(BaseModel):
    zone_id: int
    kind: ZoneKind
    center: GridToken


class ZoneMap(BaseModel):
    """Zones and the zone id of every grid cell (indexed by token)."""

    zones: list[Zone]
    cell_zone: list[int]

    def kind_of(self, token: GridToken) -> ZoneKind:
        return self.zones[self.cell_zone[token]].kind

    def cells(self, zone_id: int) -> list[GridToken]:
        return [t for t, z in enumerate(self.cell_zone) if z == zone_id]


class City(BaseModel):
    grid: GridSpec
    zones: ZoneMap
    pois: list[Poi]


Purpose = Literal["home", "work", "leisure", "anomaly"]


class Visit(BaseModel):
    model_config = ConfigDict(frozen=True)

    poi_id: str
    lat: float
    lon: float
    t_arrive: int
    t_depart: int
    purpose: Purpose


class DayPlan(BaseModel):
    """One day's visits, starting and ending at home."""

    day: int
    visits: list[Visit]

    @property
    def activities(self) -> list[Visit]:
        return self.visits[1:-1]


class Routine(BaseModel):
    agent_id: str
    home: Poi
    work: Poi
    leisure: list[Poi]
    days: list[DayPlan]


class InjectedWindow(BaseModel):
    agent_id: str
    t_start: int
    t_end: int
    kind: AnomalyKind
    day: int
    donor_id: str | None = None  # agent whose day was copied (agent_atypical only)


class GroundTruth(BaseModel):
    agent_labels: dict[str, int]
    injected_windows: list[InjectedWindow]

    @property
    def n_anomalous(self) -> int:
        return sum(self.agent_labels.values())


class SimMeta(BaseModel):
    config: SimConfig
    grid: GridSpec
    zones: ZoneMap
    split_time: int  # start of the test half


class Simulation(BaseModel):
    """Everything one simulator run produces."""

    config: SimConfig
    city: City
    routines: list[Routine]
    truth: GroundTruth
    trajectories: list[RawTrajectory]
