"""End-to-end stages: POI context, single-mode runs and the context ablation."""

from src.pipeline.core import (
    ABLATION_MODES,
    artifact_paths,
    build_poi_context,
    run_ablation,
    run_mode,
    write_mode,
)
from src.pipeline.models import AblationResult, ModeResult, PoiContext

__all__ = [
    "ABLATION_MODES",
    "artifact_paths",
    "build_poi_context",
    "run_ablation",
    "run_mode",
    "write_mode",
    "AblationResult",
    "ModeResult",
    "PoiContext",
]
