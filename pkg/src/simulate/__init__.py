"""Synthetic cities, agents with personal routines, injected anomalies and GPS traces."""

from src.simulate.core import (
    anomaly_days,
    gen_agents,
    gen_city,
    inject_anomalies,
    read_ground_truth,
    read_sim_meta,
    render_gps,
    simulate,
    write_city,
    write_ground_truth,
    write_simulation,
    write_trajectories,
)
from src.simulate.models import (
    City,
    DayPlan,
    GroundTruth,
    InjectedWindow,
    Routine,
    SimMeta,
    Simulation,
    Visit,
    Zone,
    ZoneKind,
    ZoneMap,
)

__all__ = [
    "anomaly_days",
    "gen_agents",
    "gen_city",
    "inject_anomalies",
    "read_ground_truth",
    "read_sim_meta",
    "render_gps",
    "simulate",
    "write_city",
    "write_ground_truth",
    "write_simulation",
    "write_trajectories",
    "City",
    "DayPlan",
    "GroundTruth",
    "InjectedWindow",
    "Routine",
    "SimMeta",
    "Simulation",
    "Visit",
    "Zone",
    "ZoneKind",
    "ZoneMap",
]
