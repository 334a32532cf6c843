from pathlib import Path

import numpy as np
import pytest

from src.common.errors import TooFewPoints
from src.common.models import GridSpec, cell_center, haversine_m, to_token
from src.poi import (
    ClusterModel,
    Poi,
    PoiEmbedding,
    assign_cluster,
    baseline_category_vectors,
    category_set,
    cluster_report,
    embed_corpus,
    embed_poi,
    fit_clusters,
    grid_vectors,
    load_grid_vectors,
    read_pois,
    save_grid_vectors,
    subtraj_context,
    write_pois,
)
from src.poi.core import DISTANCE_SCALE_M
from tests.helpers import seq

CATEGORIES = ["cafe", "office", "park", "residence"]


def _scatter(g: GridSpec, n: int, seed: int) -> list[Poi]:
    rng = np.random.default_rng(seed)
    pois = []
    for i in range(n):
        x = rng.uniform(0, g.n_cols * g.cell_size_m - 1e-3)
        y = rng.uniform(0, g.n_rows * g.cell_size_m - 1e-3)
        lat, lon = g.unproject(x, y)
        category = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
        pois.append(Poi(poi_id=f"p{i:03d}", category=category, lat=lat, lon=lon))
    return pois


def test_embedding_layout(grid: GridSpec):
    lat, lon = cell_center(4, grid)
    here = Poi(poi_id="a", category="cafe", lat=lat, lon=lon)
    twin = Poi(poi_id="b", category="office", lat=lat, lon=lon)
    near = Poi(poi_id="c", category="park", lat=lat + 100 / 111_195, lon=lon)
    far = Poi(poi_id="d", category="park", lat=lat + 0.1, lon=lon)
    corpus = [here, twin, near, far]

    e = embed_poi(here, corpus, radius_m=500.0)
    vec = e.array
    assert len(vec) == 2 * len(category_set(corpus))
    assert vec[:3].tolist() == [1.0, 0.0, 0.0]
    w_near = 1.0 / (1.0 + haversine_m(here, near) / DISTANCE_SCALE_M)
    hist = vec[3:]
    assert hist.sum() == pytest.approx(1.0)
    assert hist[1] / hist[2] == pytest.approx(1.0 / w_near)


def test_isolated_poi_has_empty_neighborhood(grid: GridSpec):
    lat, lon = cell_center(0, grid)
    lone = Poi(poi_id="a", category="cafe", lat=lat, lon=lon)
    vec = embed_poi(lone, [lone], radius_m=500.0).array
    assert vec.tolist() == [1.0, 0.0]


def test_embed_corpus_matches_embed_poi(big_grid: GridSpec):
    pois = _scatter(big_grid, 120, seed=0)
    batch = embed_corpus(pois, radius_m=600.0)
    for poi, e in zip(pois, batch, strict=True):
        np.testing.assert_allclose(e.array, embed_poi(poi, pois, radius_m=600.0).array, atol=1e-9)


def _blobs(seed: int) -> tuple[list[PoiEmbedding], list[int]]:
    rng = np.random.default_rng(seed)
    means = [np.zeros(6), np.full(6, 10.0)]
    embs, truth = [], []
    for i in range(80):
        label = i % 2
        embs.append(PoiEmbedding(poi_id=f"e{i}", vec=(means[label] + rng.normal(0, 1.0, 6)).tolist()))
        truth.append(label)
    return embs, truth


def test_two_blobs_are_recovered():
    embs, truth = _blobs(0)
    m = fit_clusters(embs, n_clusters=2, seed=3)
    got = [assign_cluster(e, m) for e in embs]
    assert got == truth or got == [1 - t for t in truth]
    assert m.inertia <= m.init_inertia


def test_clustering_is_seeded():
    embs, _ = _blobs(1)
    assert fit_clusters(embs, 2, seed=5) == fit_clusters(embs, 2, seed=5)


def test_too_few_points():
    embs, _ = _blobs(2)
    with pytest.raises(TooFewPoints):
        fit_clusters(embs[:2], n_clusters=3, seed=0)


def test_assign_cluster_is_nearest_centroid():
    rng = np.random.default_rng(4)
    centroids = rng.normal(size=(5, 4))
    m = ClusterModel(K=5, seed=0, centroids=centroids.tolist())
    for i in range(300):
        e = PoiEmbedding(poi_id=str(i), vec=rng.normal(size=4).tolist())
        dists = [float(((e.array - c) ** 2).sum()) for c in centroids]
        assert assign_cluster(e, m) == dists.index(min(dists))


def test_grid_vectors_tally(big_grid: GridSpec):
    pois = _scatter(big_grid, 200, seed=5)
    outside = Poi(poi_id="x", category="cafe", lat=big_grid.origin_lat - 0.01, lon=big_grid.origin_lon)
    embs = embed_corpus(pois + [outside], radius_m=500.0)
    m = fit_clusters(embs, n_clusters=3, seed=0)
    gv = grid_vectors(pois + [outside], m, big_grid, embs)

    tally: dict[int, list[int]] = {}
    for poi, e in zip(pois, embs[:-1], strict=True):
        tally.setdefault(to_token(poi, big_grid), [0, 0, 0])[assign_cluster(e, m)] += 1
    assert {t: v.counts for t, v in gv.vectors.items()} == tally
    assert gv.skipped == 1
    assert gv.labels == ["0", "1", "2"]
    assert gv.counts(-1).tolist() == [0.0, 0.0, 0.0]


def test_baseline_category_vectors(grid: GridSpec):
    lat, lon = cell_center(5, grid)
    pois = [
        Poi(poi_id="a", category="park", lat=lat, lon=lon),
        Poi(poi_id="b", category="cafe", lat=lat, lon=lon),
        Poi(poi_id="c", category="cafe", lat=lat, lon=lon),
    ]
    gv = baseline_category_vectors(pois, grid)
    assert gv.labels == ["cafe", "park"]
    assert gv.vectors[5].counts == [2, 1]
    assert list(gv.vectors) == [5]


def test_subtraj_context_sums_along_the_sequence(big_grid: GridSpec):
    pois = _scatter(big_grid, 150, seed=6)
    gv = baseline_category_vectors(pois, big_grid)
    rng = np.random.default_rng(7)
    for i in range(50):
        tokens = rng.integers(0, big_grid.vocab_size, size=int(rng.integers(2, 10))).tolist()
        want = np.zeros(gv.dim)
        for token in tokens:
            want += gv.counts(token)
        np.testing.assert_array_equal(subtraj_context(seq(i, "a", tokens), gv), want)


def test_repeated_token_counts_twice(grid: GridSpec):
    lat, lon = cell_center(2, grid)
    gv = baseline_category_vectors([Poi(poi_id="a", category="park", lat=lat, lon=lon)], grid)
    assert subtraj_context(seq(0, "a", [2, 2, 3]), gv).tolist() == [2.0]


def test_cluster_report_dominant_cell(grid: GridSpec):
    lat, lon = cell_center(7, grid)
    pois = [Poi(poi_id=str(i), category=c, lat=lat, lon=lon) for i, c in enumerate(["park", "cafe", "cafe"])]
    frame = cluster_report(baseline_category_vectors(pois, grid), grid)
    assert frame.to_dict(orient="records") == [
        {"token": 7, "row": 2, "col": 1, "dominant_cluster": "cafe", "n_pois": 3}
    ]


def test_poi_and_vector_files(tmp_path: Path, big_grid: GridSpec):
    pois = _scatter(big_grid, 30, seed=8)
    write_pois(tmp_path / "pois.csv", pois)
    again = read_pois(tmp_path / "pois.csv")
    assert [(p.poi_id, p.category, p.name) for p in again] == [(p.poi_id, p.category, p.name) for p in pois]
    np.testing.assert_allclose([p.lat for p in again], [p.lat for p in pois], rtol=1e-14)

    gv = baseline_category_vectors(pois, big_grid)
    save_grid_vectors(tmp_path / "grid.jsonl", gv)
    assert load_grid_vectors(tmp_path / "grid.jsonl") == gv


def _neighbourhood(lat: float, lon: float, surround: str, tag: str) -> list[Poi]:
    """One cafe with six `surround` POIs on a 100 m ring around it."""
    cafe = Poi(poi_id=f"{tag}-cafe", category="cafe", lat=lat, lon=lon)
    ring = [
        Poi(
            poi_id=f"{tag}-{k}",
            category=surround,
            lat=lat + 100 * np.sin(k * np.pi / 3) / 111_195,
            lon=lon + 100 * np.cos(k * np.pi / 3) / (111_195 * np.cos(np.radians(lat))),
        )
        for k in range(6)
    ]
    return [cafe, *ring]


def test_same_category_differs_by_neighbourhood():
    offices = _neighbourhood(45.0, 7.6, "office", "a")
    homes = _neighbourhood(45.05, 7.6, "residence", "b")
    pois = offices + homes
    embs = embed_corpus(pois, radius_m=500.0)
    cafe_a, cafe_b = embs[0], embs[len(offices)]
    assert cafe_a.array[:3].tolist() == cafe_b.array[:3].tolist()
    assert float(np.linalg.norm(cafe_a.array - cafe_b.array)) > 0

    m = fit_clusters(embs, n_clusters=2, seed=0)
    assert assign_cluster(cafe_a, m) != assign_cluster(cafe_b, m)
    assert {assign_cluster(e, m) for e in embs[: len(offices)]} == {assign_cluster(cafe_a, m)}
    assert {assign_cluster(e, m) for e in embs[len(offices) :]} == {assign_cluster(cafe_b, m)}


def test_one_cluster_per_distinct_point():
    rng = np.random.default_rng(9)
    embs = [PoiEmbedding(poi_id=str(i), vec=rng.normal(size=4).tolist()) for i in range(5)]
    m = fit_clusters(embs, n_clusters=5, seed=2)
    assert m.inertia == pytest.approx(0.0, abs=1e-12)
    assert sorted(assign_cluster(e, m) for e in embs) == [0, 1, 2, 3, 4]


def test_equidistant_point_goes_to_lowest_index():
    centroids = [[10.0, 10.0], [1.0, 0.0], [-10.0, 10.0], [10.0, -10.0], [-1.0, 0.0]]
    m = ClusterModel(K=5, seed=0, centroids=centroids)
    for y in (0.0, 3.0, -4.5):
        assert assign_cluster(PoiEmbedding(poi_id="p", vec=[0.0, y]), m) == 1
