"""Builders for hand-made sequences, trajectories and small simulated studies."""

from collections.abc import Sequence

from src.common.models import GpsPoint, GridSpec, PoiContextConfig, PreprocessConfig, SimConfig, cell_center
from src.pipeline import PoiContext, build_poi_context
from src.preprocess import RawTrajectory, TokenDataset, TokenSequence, preprocess_corpus
from src.simulate import simulate


def seq(subtraj_id: int, agent_id: str, tokens: Sequence[int], split: str = "train") -> TokenSequence:
    return TokenSequence(
        subtraj_id=subtraj_id,
        agent_id=agent_id,
        tokens=list(tokens),
        t_start=1_000 * subtraj_id,
        t_end=1_000 * subtraj_id + 500,
        split=split,  # pyright: ignore[reportArgumentType]
    )


def render_stays(
    agent_id: str,
    g: GridSpec,
    stays: Sequence[tuple[int, int, int]],
    step_s: int = 300,
) -> RawTrajectory:
    """Fixes every `step_s` seconds at the center of each (token, t_arrive, t_depart) stay.

    Moves between stays are instantaneous; the first fix of the next stay is already there.
    """
    points: list[GpsPoint] = []
    for token, t_arrive, t_depart in stays:
        lat, lon = cell_center(token, g)
        points.extend(GpsPoint(lat=lat, lon=lon, t=t) for t in range(t_arrive, t_depart + 1, step_s))
    return RawTrajectory(agent_id=agent_id, points=points)


def study(sim_cfg: SimConfig, n_clusters: int = 8) -> tuple[TokenDataset, PoiContext, dict[str, int]]:
    """Simulated corpus, its POI context and agent labels, with default preprocessing."""
    sim = simulate(sim_cfg)
    dataset = preprocess_corpus(sim.trajectories, sim.city.grid, PreprocessConfig())
    poi_cfg = PoiContextConfig(n_clusters=n_clusters, seed=sim_cfg.seed)
    poi = build_poi_context(sim.city.pois, dataset, poi_cfg)
    return dataset, poi, sim.truth.agent_labels
