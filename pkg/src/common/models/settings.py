"""Settings models for trajscope. Every field has a default; see `config.toml`."""

from enum import Enum
from pathlib import Path
from typing_extensions import Self

from pydantic import BaseModel, Field, field_validator, model_validator

from src.common.errors import UnknownMode
from src.common.models.base import GridSpec


class ContextMode(Enum):
    """Which context slices condition the VAE."""

    NONE = "none"
    POI_CATEGORIES = "poi_categories"
    POI_CONTEXTUAL = "poi_contextual"
    AGENT_ID = "agent_id"
    COMBINED = "combined"  # poi_contextual + agent_id

    @property
    def uses_agent(self) -> bool:
        return self in (ContextMode.AGENT_ID, ContextMode.COMBINED)

    @property
    def uses_poi(self) -> bool:
        return self in (ContextMode.POI_CATEGORIES, ContextMode.POI_CONTEXTUAL, ContextMode.COMBINED)

    @property
    def slug(self) -> str:
        """Kebab-case spelling used on the command line."""
        return self.value.replace("_", "-")

    @classmethod
    def parse(cls, value: "str | ContextMode") -> "ContextMode":
        if isinstance(value, ContextMode):
            return value
        key = value.strip().lower().replace("-", "_")
        if key in ("poi_contextual+agent_id", "poi_contextual_agent_id"):
            key = "combined"
        try:
            return cls(key)
        except ValueError:
            raise UnknownMode(f"unknown context mode: {value!r}") from None


class PreprocessConfig(BaseModel):
    spd_duration_s: int = 1_200
    spd_radius_m: float = 200.0
    long_stay_split_s: int = 14_400
    transition_split_s: int = 18_000
    w_max: int = 32
    collapse_repeats: bool = True
    cell_size_m: float = 500.0  # used when the grid is anchored on the data
    train_fraction: float = 0.5

    @field_validator(
        "spd_duration_s", "spd_radius_m", "long_stay_split_s", "transition_split_s", "cell_size_m"
    )
    @staticmethod
    def strictly_positive(value: float) -> float:
        if value <= 0:
            raise ValueError("Threshold must be > 0.")
        return value

    @field_validator("w_max")
    @staticmethod
    def at_least_two(value: int) -> int:
        if value < 2:
            raise ValueError("w_max must be >= 2.")
        return value

    @field_validator("train_fraction")
    @staticmethod
    def open_unit_interval(value: float) -> float:
        if not (0.0 < value < 1.0):
            raise ValueError("Value must be strictly between 0 and 1.")
        return value

    @model_validator(mode="after")
    def long_stay_not_shorter_than_spd(self) -> Self:
        if self.long_stay_split_s < self.spd_duration_s:
            raise ValueError("long_stay_split_s must be >= spd_duration_s")
        return self


class PoiContextConfig(BaseModel):
    radius_m: float = Field(default=500.0, gt=0)
    n_clusters: int = Field(default=16, ge=2)
    seed: int = 42


class HyperParams(BaseModel):
    d_tok: int = Field(default=32, ge=1)
    d_agent: int = Field(default=16, ge=1)
    d_ctx: int = Field(default=16, ge=1)
    d_hid: int = Field(default=64, ge=1)
    d_z: int = Field(default=16, ge=1)
    mc_samples: int = Field(default=16, ge=1)  # L, Monte-Carlo draws at scoring time
    lr: float = Field(default=1e-3, gt=0)
    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=64, ge=1)
    w_max: int = Field(default=32, ge=2)
    seed: int = 42
    length_normalize: bool = True


class AnomalyKind(Enum):
    AGENT_ATYPICAL = "agent_atypical"
    SPATIAL_ATYPICAL = "spatial_atypical"


DEFAULT_CATEGORIES = [
    "residence",
    "office",
    "school",
    "library",
    "cafe",
    "restaurant",
    "shop",
    "park",
    "hotel",
    "terminal",
]


class SimConfig(BaseModel):
    seed: int = 42
    n_agents: int = Field(default=200, ge=1)
    n_days: int = Field(default=30, ge=2)
    grid: GridSpec = GridSpec(origin_lat=45.0, origin_lon=7.6, cell_size_m=500.0, n_rows=24, n_cols=24)
    n_pois: int = Field(default=1_500, ge=0)
    categories: list[str] = Field(default_factory=lambda: list(DEFAULT_CATEGORIES))
    anomaly_rate: float = 0.05
    anomaly_kinds: dict[AnomalyKind, float] = Field(
        default_factory=lambda: {AnomalyKind.AGENT_ATYPICAL: 0.5, AnomalyKind.SPATIAL_ATYPICAL: 0.5}
    )
    fix_interval_s: int = Field(default=300, gt=0)
    gps_noise_m: float = Field(default=15.0, ge=0)
    travel_speed_mps: float = Field(default=8.0, gt=0)
    t0: int = Field(default=1_700_000_000, ge=0)

    @field_validator("anomaly_rate")
    @staticmethod
    def between_zero_and_one(value: float) -> float:
        if not (0.0 <= value < 1.0):
            raise ValueError("Value must be in [0, 1).")
        return value

    @field_validator("anomaly_kinds")
    @staticmethod
    def non_negative_weights(value: dict[AnomalyKind, float]) -> dict[AnomalyKind, float]:
        if any(w < 0 for w in value.values()) or sum(value.values()) <= 0:
            raise ValueError("Anomaly kind weights must be non-negative with a positive sum.")
        return value

    @field_validator("categories")
    @staticmethod
    def required_categories(value: list[str]) -> list[str]:
        missing = {"residence", "office"} - set(value)
        if missing:
            raise ValueError(f"Category set must include {sorted(missing)}.")
        if len(set(value)) != len(value):
            raise ValueError("Categories must be unique.")
        return value


class RunSettings(BaseModel):
    mode: ContextMode = ContextMode.COMBINED
    threads: int = Field(default=1, ge=1)
    out: Path = Path("runs/default")

    @field_validator("mode", mode="before")
    @staticmethod
    def parse_mode(value: str | ContextMode) -> ContextMode:
        return ContextMode.parse(value)


class RunConfig(BaseModel):
    """Merged settings for every stage."""

    seed: int = 42
    simulate: SimConfig = SimConfig()
    preprocess: PreprocessConfig = PreprocessConfig()
    poi: PoiContextConfig = PoiContextConfig()
    model: HyperParams = HyperParams()
    run: RunSettings = RunSettings()
