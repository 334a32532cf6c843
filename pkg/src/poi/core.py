"""POI contextual embeddings, contextualized categories and per-grid count vectors."""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from sklearn.cluster import KMeans, kmeans_plusplus
from sklearn.neighbors import BallTree

from src.common.errors import TooFewPoints
from src.common.models import EARTH_RADIUS_M, GridSpec, GridToken, haversine_m, to_token, token_cell
from src.common.utils.config import get_config
from src.common.utils.io import iter_jsonl, read_csv, read_json, write_csv, write_json, write_jsonl
from src.common.utils.logger import logger
from src.poi.models import ClusterModel, GridPoiVector, GridVectors, Poi, PoiEmbedding
from src.preprocess.models import TokenSequence

POI_COLUMNS = ["poi_id", "name", "category", "lat", "lon"]

# neighbor weight 1 / (1 + d / DISTANCE_SCALE_M)
DISTANCE_SCALE_M = 100.0

MAX_LLOYD_ITERATIONS = 100


def category_set(pois: Sequence[Poi]) -> list[str]:
    """Sorted category vocabulary C of a corpus."""
    return sorted({p.category for p in pois})


def _embedding(poi: Poi, index: dict[str, int], neighbors: list[tuple[str, float]]) -> PoiEmbedding:
    vec = np.zeros(2 * len(index), dtype=np.float64)
    vec[index[poi.category]] = 1.0
    hist = vec[len(index) :]
    for category, dist_m in neighbors:
        hist[index[category]] += 1.0 / (1.0 + dist_m / DISTANCE_SCALE_M)
    total = hist.sum()
    if total > 0:
        hist /= total
    return PoiEmbedding(poi_id=poi.poi_id, vec=vec.tolist())


def embed_poi(
    p: Poi,
    corpus: Sequence[Poi],
    radius_m: float | None = None,
    categories: Sequence[str] | None = None,
) -> PoiEmbedding:
    """Embed one POI from its own category and the categories around it.

    Neighbors are the other corpus POIs within `radius_m` (inclusive); POIs sharing `p`'s
    coordinates count as neighbors.
    """
    radius_m = radius_m if radius_m is not None else get_config().poi.radius_m
    index = {c: k for k, c in enumerate(categories or category_set(corpus))}
    neighbors: list[tuple[str, float]] = []
    for q in corpus:
        if q.poi_id == p.poi_id:
            continue
        d = haversine_m(p, q)
        if d <= radius_m:
            neighbors.append((q.category, d))
    return _embedding(p, index, neighbors)


def embed_corpus(
    pois: Sequence[Poi],
    radius_m: float | None = None,
    categories: Sequence[str] | None = None,
) -> list[PoiEmbedding]:
    """`embed_poi` for every POI at once, using a haversine BallTree for the radius search."""
    radius_m = radius_m if radius_m is not None else get_config().poi.radius_m
    if not pois:
        return []
    index = {c: k for k, c in enumerate(categories or category_set(pois))}
    coords = np.radians(np.array([[p.lat, p.lon] for p in pois], dtype=np.float64))
    tree = BallTree(coords, metric="haversine")
    hits, dists = tree.query_radius(
        coords, r=radius_m / EARTH_RADIUS_M, return_distance=True, sort_results=True
    )

    embeddings: list[PoiEmbedding] = []
    for i, poi in enumerate(pois):
        neighbors = [
            (pois[j].category, float(d) * EARTH_RADIUS_M)
            for j, d in zip(hits[i], dists[i], strict=True)
            if j != i
        ]
        embeddings.append(_embedding(poi, index, neighbors))
    logger.info("Embedded %d POIs over %d categories (radius %.0f m)", len(pois), len(index), radius_m)
    return embeddings


def _inertia(x: NDArray[np.float64], centers: NDArray[np.float64]) -> float:
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).sum())


def fit_clusters(
    embs: Sequence[PoiEmbedding],
    n_clusters: int | None = None,
    seed: int | None = None,
) -> ClusterModel:
    """k-means++ seeding followed by Lloyd iterations to an assignment fixpoint (at most 100).

    Raises:
        TooFewPoints: if there are fewer embeddings than clusters.
    """
    cfg = get_config().poi
    k = n_clusters if n_clusters is not None else cfg.n_clusters
    seed = seed if seed is not None else cfg.seed
    if len(embs) < k:
        raise TooFewPoints(f"need at least {k} embeddings to fit {k} clusters, got {len(embs)}")

    x = np.stack([e.array for e in embs])
    init, _ = kmeans_plusplus(x, n_clusters=k, random_state=seed)
    km = KMeans(
        n_clusters=k,
        init=init,
        n_init=1,
        max_iter=MAX_LLOYD_ITERATIONS,
        tol=0.0,
        algorithm="lloyd",
        random_state=seed,
    ).fit(x)
    model = ClusterModel(
        K=k,
        seed=seed,
        centroids=km.cluster_centers_.tolist(),
        inertia=float(km.inertia_),
        init_inertia=_inertia(x, init),
    )
    logger.info("Fitted %d clusters in %d iterations, inertia %.4f", k, km.n_iter_, model.inertia)
    return model


def assign_cluster(e: PoiEmbedding, m: ClusterModel) -> int:
    """Nearest centroid; ties go to the lowest index."""
    d2 = ((m.array - e.array[None, :]) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def _tally(pois: Sequence[Poi], keys: Sequence[int], labels: list[str], g: GridSpec) -> GridVectors:
    vectors: dict[GridToken, GridPoiVector] = {}
    skipped = 0
    for poi, key in zip(pois, keys, strict=True):
        if not g.contains(poi.lat, poi.lon):
            skipped += 1
            continue
        token = to_token(poi, g)
        cell = vectors.setdefault(token, GridPoiVector(token_id=token, counts=[0] * len(labels)))
        cell.counts[key] += 1
    if skipped:
        logger.warning("Skipped %d POIs outside the grid", skipped)
    return GridVectors(labels=labels, vectors=dict(sorted(vectors.items())), skipped=skipped)


def grid_vectors(
    pois: Sequence[Poi],
    m: ClusterModel,
    g: GridSpec,
    embeddings: Sequence[PoiEmbedding] | None = None,
) -> GridVectors:
    """Count, per grid cell, the POIs of each contextualized category (cluster)."""
    embeddings = embeddings if embeddings is not None else embed_corpus(pois)
    keys = [assign_cluster(e, m) for e in embeddings]
    return _tally(pois, keys, [str(k) for k in range(m.K)], g)


def baseline_category_vectors(
    pois: Sequence[Poi],
    g: GridSpec,
    categories: Sequence[str] | None = None,
) -> GridVectors:
    """Like `grid_vectors`, keyed by the raw POI category instead of the cluster id."""
    labels = list(categories or category_set(pois))
    index = {c: k for k, c in enumerate(labels)}
    return _tally(pois, [index[p.category] for p in pois], labels, g)


def subtraj_context(seq: TokenSequence, gv: GridVectors) -> NDArray[np.float64]:
    """Sum of the cell count vectors along a sequence; repeated tokens count each time."""
    total = np.zeros(gv.dim, dtype=np.float64)
    for token in seq.tokens:
        total += gv.counts(token)
    return total


def cluster_report(gv: GridVectors, g: GridSpec) -> pd.DataFrame:
    """Dominant contextualized category per cell, for choropleth rendering."""
    rows: list[dict[str, object]] = []
    for token, vec in gv.vectors.items():
        row, col = token_cell(token, g)
        counts = np.asarray(vec.counts)
        rows.append(
            {
                "token": token,
                "row": row,
                "col": col,
                "dominant_cluster": gv.labels[int(np.argmax(counts))],
                "n_pois": int(counts.sum()),
            }
        )
    return pd.DataFrame(rows, columns=["token", "row", "col", "dominant_cluster", "n_pois"])


def read_pois(path: str | Path) -> list[Poi]:
    frame = read_csv(path, ["poi_id", "category", "lat", "lon"], dtype={"poi_id": str, "name": str})
    frame["name"] = frame["name"].fillna("") if "name" in frame.columns else ""
    records = frame[POI_COLUMNS].to_dict(orient="records")
    return [Poi(**rec) for rec in records]  # pyright: ignore[reportArgumentType]


def write_pois(path: str | Path, pois: Sequence[Poi]) -> None:
    write_csv(path, pd.DataFrame([p.model_dump() for p in pois], columns=POI_COLUMNS))


def save_clusters(path: str | Path, m: ClusterModel) -> None:
    write_json(path, m.model_dump(mode="json"))


def load_clusters(path: str | Path) -> ClusterModel:
    return ClusterModel.model_validate(read_json(path))


def save_grid_vectors(path: str | Path, gv: GridVectors) -> None:
    """JSONL of {"token", "counts"}; labels and the skip count go to `<path>.labels.json`."""
    write_jsonl(path, gv.vectors.values())
    write_json(f"{path}.labels.json", {"labels": gv.labels, "skipped": gv.skipped})


def load_grid_vectors(path: str | Path) -> GridVectors:
    side = read_json(f"{path}.labels.json")
    vectors = {v.token_id: v for v in iter_jsonl(path, GridPoiVector)}
    return GridVectors(labels=side["labels"], vectors=vectors, skipped=side.get("skipped", 0))
