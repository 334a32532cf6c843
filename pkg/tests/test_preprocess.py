import json
from pathlib import Path

import numpy as np
import pytest

from src.common.errors import EmptyTrajectory, OutOfBounds, RecordParseError
from src.common.models import GpsPoint, GridSpec, PreprocessConfig, StayPoint, cell_center, haversine_m
from src.common.models.base import DEG_TO_M
from src.preprocess import (
    RawTrajectory,
    Subtrajectory,
    detect_stay_points,
    load_trajectories,
    partition,
    preprocess_corpus,
    read_dataset,
    tokenize,
    write_dataset,
)
from tests.helpers import render_stays

HOUR = 3_600
MINUTE = 60


Stay = tuple[float, float, int, int]


def spd_oracle(points: list[GpsPoint], radius_m: float, duration_s: int) -> list[Stay]:
    """Exhaustive stay point detection over every (i, j) window.

    From the current cursor, the earliest anchor i owning a qualifying window wins and its longest
    qualifying window is kept. Window i..j-1 qualifies when every fix in it lies within `radius_m`
    of fix i, its dwell is positive, and the time from t_i to the next fix (the last fix at the end
    of the trace) exceeds `duration_s`.
    """
    n = len(points)
    dist = np.array([[haversine_m(p, q) for q in points] for p in points])
    stays: list[Stay] = []
    cursor = 0
    while cursor < n:
        found = None
        for i in range(cursor, n):
            windows = []
            for j in range(i + 1, n + 1):
                t_end = points[j].t if j < n else points[-1].t
                inside = bool(np.all(dist[i, i:j] <= radius_m))
                if inside and t_end - points[i].t > duration_s and points[j - 1].t > points[i].t:
                    windows.append(j)
            if windows:
                found = (i, max(windows))
                break
        if found is None:
            break
        i, j = found
        window = points[i:j]
        stays.append(
            (
                sum(p.lat for p in window) / len(window),
                sum(p.lon for p in window) / len(window),
                points[i].t,
                points[j - 1].t,
            )
        )
        cursor = j
    return stays


def random_trace(rng: np.random.Generator) -> RawTrajectory:
    """Dwell bursts with small jitter, separated by moves of 100-800 m."""
    n = int(rng.integers(1, 51))
    lat, lon, t = 45.0, 7.6, 0
    points: list[GpsPoint] = []
    while len(points) < n:
        if rng.random() < 0.5:
            step = rng.uniform(0, 60)
        else:
            step = rng.uniform(100, 800)
        angle = rng.uniform(0, 2 * np.pi)
        lat += step * np.sin(angle) / DEG_TO_M
        lon += step * np.cos(angle) / (DEG_TO_M * np.cos(np.radians(45.0)))
        t += int(rng.integers(60, 601))
        points.append(GpsPoint(lat=lat, lon=lon, t=t))
    return RawTrajectory(agent_id="a", points=points)


def test_stay_points_match_window_oracle():
    cfg = PreprocessConfig()
    rng = np.random.default_rng(0)
    n_stays = 0
    for _ in range(1_000):
        traj = random_trace(rng)
        got = detect_stay_points(traj, cfg)
        want = spd_oracle(traj.points, cfg.spd_radius_m, cfg.spd_duration_s)
        assert [(s.t_arrive, s.t_depart) for s in got] == [(w[2], w[3]) for w in want]
        for s, w in zip(got, want, strict=True):
            assert s.lat == pytest.approx(w[0], rel=1e-12)
            assert s.lon == pytest.approx(w[1], rel=1e-12)
        n_stays += len(got)
    assert n_stays > 100


def test_single_dwell_cluster():
    ts = np.linspace(0, 40 * MINUTE, 10).astype(int)
    traj = RawTrajectory(agent_id="a", points=[GpsPoint(lat=45.0, lon=7.6, t=int(t)) for t in ts])
    stays = detect_stay_points(traj, PreprocessConfig())
    assert len(stays) == 1
    assert (stays[0].lat, stays[0].lon) == pytest.approx((45.0, 7.6))
    assert stays[0].dwell_s == 40 * MINUTE


def test_constant_velocity_never_dwells():
    step = 100.0 / DEG_TO_M
    traj = RawTrajectory(
        agent_id="a", points=[GpsPoint(lat=45.0 + i * step, lon=7.6, t=i * MINUTE) for i in range(60)]
    )
    assert detect_stay_points(traj, PreprocessConfig()) == []


def test_three_dwell_clusters(big_grid: GridSpec):
    traj = render_stays(
        "a", big_grid, [(0, 0, 30 * MINUTE), (9, 35 * MINUTE, 80 * MINUTE), (27, 85 * MINUTE, 2 * HOUR)]
    )
    stays = detect_stay_points(traj, PreprocessConfig())
    assert [(s.t_arrive, s.t_depart) for s in stays] == [
        (0, 30 * MINUTE),
        (35 * MINUTE, 80 * MINUTE),
        (85 * MINUTE, 2 * HOUR),
    ]


def test_empty_trajectory_raises():
    with pytest.raises(EmptyTrajectory):
        detect_stay_points(RawTrajectory(agent_id="a", points=[]), PreprocessConfig())


def _stays(spans: list[tuple[int, int]]) -> list[StayPoint]:
    """(t_arrive, t_depart) pairs -> stay points at distinct coordinates."""
    return [StayPoint(lat=45.0 + k * 0.01, lon=7.6, t_arrive=a, t_depart=d) for k, (a, d) in enumerate(spans)]


def test_partition_without_cuts():
    stays = _stays([(k * HOUR, k * HOUR + 30 * MINUTE) for k in range(5)])
    parts = partition(stays, PreprocessConfig())
    assert len(parts) == 1
    assert parts[0].stays == stays


def test_partition_long_stay_is_shared():
    a, b, c = _stays([(0, 30 * MINUTE), (HOUR, 10 * HOUR), (11 * HOUR, 12 * HOUR)])
    parts = partition([a, b, c], PreprocessConfig())
    assert [p.stays for p in parts] == [[a, b], [b, c]]


def test_partition_long_transition_is_a_hard_cut():
    stays = _stays([(0, 30 * MINUTE), (30 * MINUTE + 6 * HOUR, 7 * HOUR)])
    assert partition(stays, PreprocessConfig()) == []
    assert partition([], PreprocessConfig()) == []


def test_partition_soundness():
    cfg = PreprocessConfig()
    rng = np.random.default_rng(4)
    for _ in range(300):
        spans, t = [], 0
        for _ in range(int(rng.integers(0, 15))):
            t += int(rng.integers(10 * MINUTE, 7 * HOUR))
            dwell = int(rng.integers(20 * MINUTE, 6 * HOUR))
            spans.append((t, t + dwell))
            t += dwell
        stays = _stays(spans)
        parts = partition(stays, cfg)
        seen: dict[StayPoint, int] = {}
        for part in parts:
            assert len(part.stays) >= 2
            for s in part.stays[1:-1]:
                assert s.dwell_s < cfg.long_stay_split_s
            for prev, nxt in zip(part.stays, part.stays[1:]):
                assert nxt.t_arrive - prev.t_depart <= cfg.transition_split_s
            for s in part.stays:
                seen[s] = seen.get(s, 0) + 1
        for s, count in seen.items():
            assert count == 1 or (count == 2 and s.dwell_s >= cfg.long_stay_split_s)


def _sub(g: GridSpec, tokens: list[int]) -> Subtrajectory:
    stays = []
    for k, token in enumerate(tokens):
        lat, lon = cell_center(token, g)
        stays.append(StayPoint(lat=lat, lon=lon, t_arrive=k * HOUR, t_depart=k * HOUR + 30 * MINUTE))
    return Subtrajectory(agent_id="a", stays=stays)


def test_tokenize_collapses_repeats(grid: GridSpec):
    seq = tokenize(_sub(grid, [3, 3, 7]), grid, PreprocessConfig(collapse_repeats=True))
    assert seq is not None and seq.tokens == [3, 7]
    assert seq.t_start == 0 and seq.t_end == 2 * HOUR + 30 * MINUTE


def test_tokenize_keeps_repeats_when_asked(grid: GridSpec):
    seq = tokenize(_sub(grid, [3, 3, 7]), grid, PreprocessConfig(collapse_repeats=False))
    assert seq is not None and seq.tokens == [3, 3, 7]


def test_tokenize_truncates_to_w_max(big_grid: GridSpec):
    tokens = list(range(40))
    seq = tokenize(_sub(big_grid, tokens), big_grid, PreprocessConfig(w_max=32))
    assert seq is not None and seq.tokens == tokens[:32]


def test_tokenize_drops_single_cell(grid: GridSpec):
    assert tokenize(_sub(grid, [5, 5]), grid, PreprocessConfig()) is None


def test_tokenize_out_of_bounds(grid: GridSpec):
    sub = Subtrajectory(
        agent_id="a",
        stays=[
            StayPoint(lat=44.0, lon=7.6, t_arrive=0, t_depart=10),
            StayPoint(lat=45.0, lon=7.6, t_arrive=20, t_depart=30),
        ],
    )
    with pytest.raises(OutOfBounds):
        tokenize(sub, grid, PreprocessConfig())


def test_empty_corpus(grid: GridSpec):
    ds = preprocess_corpus([], grid, PreprocessConfig())
    assert len(ds) == 0
    assert ds.stats.n_agents == 0 and ds.stats.min_length == 0 and ds.stats.max_length == 0


def _three_trip_agent(g: GridSpec, agent_id: str = "a") -> RawTrajectory:
    # long stay at 10 splits [0, 9, 18] / [18, 27, 36]; a 6 h hole cuts before [45, 54]
    half = 30 * MINUTE
    return render_stays(
        agent_id,
        g,
        [
            (0, 0, half),
            (9, 35 * MINUTE, 65 * MINUTE),
            (18, 70 * MINUTE, 70 * MINUTE + 5 * HOUR),
            (27, 75 * MINUTE + 5 * HOUR, 105 * MINUTE + 5 * HOUR),
            (36, 110 * MINUTE + 5 * HOUR, 140 * MINUTE + 5 * HOUR),
            (45, 140 * MINUTE + 11 * HOUR, 170 * MINUTE + 11 * HOUR),
            (54, 175 * MINUTE + 11 * HOUR, 205 * MINUTE + 11 * HOUR),
        ],
    )


def test_one_agent_three_sequences(big_grid: GridSpec):
    ds = preprocess_corpus([_three_trip_agent(big_grid)], big_grid, PreprocessConfig())
    assert [s.tokens for s in ds.sequences] == [[0, 9, 18], [18, 27, 36], [45, 54]]
    assert {s.agent_id for s in ds.sequences} == {"a"}
    assert [s.subtraj_id for s in ds.sequences] == [0, 1, 2]
    assert ds.stats.min_length == 2 and ds.stats.max_length == 3
    assert ds.stats.n_stays == 7


def _far_stays(start: int) -> list[GpsPoint]:
    """Two one-hour stays far outside any test grid."""
    return [GpsPoint(lat=10.0 + 0.1 * (t >= HOUR), lon=10.0, t=start + t) for t in range(0, 2 * HOUR, 300)]


def test_corpus_split_and_failures(big_grid: GridSpec):
    stray = RawTrajectory(agent_id="z", points=_far_stays(0))
    empty = RawTrajectory(agent_id="e", points=[])
    trajs = [_three_trip_agent(big_grid, "b"), _three_trip_agent(big_grid, "a"), stray, empty]
    ds = preprocess_corpus(trajs, big_grid, PreprocessConfig())
    assert [f.agent_id for f in ds.stats.failures] == ["e"]
    assert [(s.agent_id, s.t_start) for s in ds.stats.skipped] == [("z", 0)]
    assert [s.agent_id for s in ds.sequences] == ["a"] * 3 + ["b"] * 3
    for s in ds.sequences:
        assert s.split == ("train" if s.t_start < ds.stats.split_time else "test")
    assert ds.stats.train.n_sequences + ds.stats.test.n_sequences == len(ds)


def test_out_of_grid_trip_drops_only_that_subtrajectory(big_grid: GridSpec):
    base = _three_trip_agent(big_grid, "a")
    start = base.points[-1].t + 6 * HOUR
    traj = RawTrajectory(agent_id="a", points=base.points + _far_stays(start))
    ds = preprocess_corpus([traj], big_grid, PreprocessConfig())
    assert [s.tokens for s in ds.sequences] == [[0, 9, 18], [18, 27, 36], [45, 54]]
    assert ds.stats.failures == []
    [skip] = ds.stats.skipped
    assert (skip.agent_id, skip.t_start) == ("a", start)
    assert skip.t_end > skip.t_start


def test_parallel_matches_sequential(big_grid: GridSpec):
    trajs = [_three_trip_agent(big_grid, f"agent_{i}") for i in range(4)]
    one = preprocess_corpus(trajs, big_grid, PreprocessConfig(), workers=1)
    two = preprocess_corpus(trajs, big_grid, PreprocessConfig(), workers=2)
    assert one.model_dump_json() == two.model_dump_json()


def test_dataset_files(tmp_path: Path, big_grid: GridSpec):
    ds = preprocess_corpus([_three_trip_agent(big_grid)], big_grid, PreprocessConfig())
    write_dataset(ds, tmp_path / "dataset.jsonl", tmp_path / "dataset_meta.json")
    first = json.loads((tmp_path / "dataset.jsonl").read_text().splitlines()[0])
    assert set(first) == {"subtraj_id", "agent_id", "tokens", "t_start", "t_end", "split"}
    again = read_dataset(tmp_path / "dataset.jsonl", tmp_path / "dataset_meta.json")
    assert again == ds


def test_load_trajectories_requires_sorted_input(tmp_path: Path):
    path = tmp_path / "t.jsonl"
    rows = [
        {"agent_id": "a", "lat": 45.0, "lon": 7.6, "t": 10},
        {"agent_id": "a", "lat": 45.0, "lon": 7.6, "t": 20},
        {"agent_id": "b", "lat": 45.0, "lon": 7.6, "t": 5},
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    trajs = load_trajectories(path)
    assert [(t.agent_id, len(t.points)) for t in trajs] == [("a", 2), ("b", 1)]

    path.write_text("".join(json.dumps(r) + "\n" for r in reversed(rows)))
    with pytest.raises(RecordParseError):
        load_trajectories(path)
