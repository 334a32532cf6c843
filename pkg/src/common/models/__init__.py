"""Common models."""

from src.common.models.base import (
    EARTH_RADIUS_M,
    GpsPoint,
    GridSpec,
    GridToken,
    StayPoint,
    cell_center,
    haversine_m,
    haversine_np,
    to_token,
    token_cell,
)
from src.common.models.settings import (
    AnomalyKind,
    ContextMode,
    HyperParams,
    PoiContextConfig,
    PreprocessConfig,
    RunConfig,
    RunSettings,
    SimConfig,
)

__all__ = [
    "EARTH_RADIUS_M",
    "GpsPoint",
    "GridSpec",
    "GridToken",
    "StayPoint",
    "cell_center",
    "haversine_m",
    "haversine_np",
    "to_token",
    "token_cell",
    "AnomalyKind",
    "ContextMode",
    "HyperParams",
    "PoiContextConfig",
    "PreprocessConfig",
    "RunConfig",
    "RunSettings",
    "SimConfig",
]
