"""Per-mode context assembly: agent rows and POI count features for the ablation modes."""

from collections.abc import Sequence

import numpy as np
import torch

from src.common.errors import MissingContext
from src.common.models import ContextMode
from src.cvae.models import Batch
from src.poi import GridVectors, subtraj_context
from src.preprocess import TokenSequence

UNKNOWN_AGENT = 0


def agent_table(agent_ids: Sequence[str]) -> dict[str, int]:
    """Sorted training agents -> embedding rows 1..n (row 0 is reserved for unseen agents)."""
    return {agent: row for row, agent in enumerate(sorted(set(agent_ids)), start=1)}


class ContextBuilder:
    """Builds model inputs for one context mode.

    The POI features fed to the model always have `poi_dim` entries; modes without POI context
    feed zeros, which the model ignores anyway. Agent ids missing from the table map to the
    unknown row.
    """

    def __init__(
        self,
        mode: ContextMode,
        agents: dict[str, int],
        poi_vectors: GridVectors | None = None,
        poi_dim: int | None = None,
    ):
        self.mode = mode
        self.agents = agents
        self.poi_vectors = poi_vectors if mode.uses_poi else None
        if poi_dim is None:
            poi_dim = poi_vectors.dim if poi_vectors is not None else 1
        self.poi_dim = poi_dim

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def agent_index(self, agent_id: str) -> int:
        return self.agents.get(agent_id, UNKNOWN_AGENT)

    def poi_features(self, seq: TokenSequence) -> np.ndarray:
        if self.poi_vectors is None:
            return np.zeros(self.poi_dim, dtype=np.float64)
        return subtraj_context(seq, self.poi_vectors)

    def batch(self, seqs: Sequence[TokenSequence]) -> Batch:
        """Pad `seqs` into one Batch; padding positions hold -1."""
        width = max((len(s.tokens) for s in seqs), default=0)
        tokens = torch.full((len(seqs), width), -1, dtype=torch.long)
        for i, seq in enumerate(seqs):
            tokens[i, : len(seq.tokens)] = torch.tensor(seq.tokens, dtype=torch.long)
        poi = np.stack([self.poi_features(s) for s in seqs]) if seqs else np.zeros((0, self.poi_dim))
        return Batch(
            tokens=tokens,
            lengths=torch.tensor([len(s.tokens) for s in seqs], dtype=torch.long),
            agent_idx=torch.tensor([self.agent_index(s.agent_id) for s in seqs], dtype=torch.long),
            poi=torch.from_numpy(poi.astype(np.float64)),
        )


def ablation_context(
    mode: ContextMode | str,
    agents: dict[str, int],
    contextual: GridVectors | None = None,
    categories: GridVectors | None = None,
    poi_dim: int | None = None,
) -> ContextBuilder:
    """Context builder for one ablation mode.

    `poi_categories` reads the raw-category vectors, `poi_contextual` and `combined` read the
    cluster vectors. The POI feature width follows the vectors the mode reads, falling back to
    the cluster vectors (then 1) for modes that use no POI context, unless `poi_dim` pins it.

    Raises:
        UnknownMode: if `mode` is not one of the five ablation modes.
        MissingContext: if the mode reads POI vectors that were not passed.
    """
    mode = ContextMode.parse(mode)
    if mode is ContextMode.POI_CATEGORIES:
        source = categories
    elif mode.uses_poi:
        source = contextual
    else:
        source = None
    if mode.uses_poi and source is None:
        raise MissingContext(f"mode {mode.slug} needs POI grid vectors")
    if poi_dim is None:
        fallback = contextual if contextual is not None else categories
        poi_dim = source.dim if source is not None else (fallback.dim if fallback is not None else 1)
    return ContextBuilder(mode, agents, source, poi_dim=poi_dim)
