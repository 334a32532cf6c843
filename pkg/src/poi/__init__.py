"""POI context: neighborhood embeddings, contextualized categories, grid count vectors."""

from src.poi.core import (
    assign_cluster,
    baseline_category_vectors,
    category_set,
    cluster_report,
    embed_corpus,
    embed_poi,
    fit_clusters,
    grid_vectors,
    load_clusters,
    load_grid_vectors,
    read_pois,
    save_clusters,
    save_grid_vectors,
    subtraj_context,
    write_pois,
)
from src.poi.models import ClusterModel, GridPoiVector, GridVectors, Poi, PoiEmbedding

__all__ = [
    "assign_cluster",
    "baseline_category_vectors",
    "category_set",
    "cluster_report",
    "embed_corpus",
    "embed_poi",
    "fit_clusters",
    "grid_vectors",
    "load_clusters",
    "load_grid_vectors",
    "read_pois",
    "save_clusters",
    "save_grid_vectors",
    "subtraj_context",
    "write_pois",
    "ClusterModel",
    "GridPoiVector",
    "GridVectors",
    "Poi",
    "PoiEmbedding",
]
