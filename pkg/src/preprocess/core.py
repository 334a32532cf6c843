"""Raw GPS -> stay points -> subtrajectories -> grid-token sequences."""

from collections.abc import Sequence
from itertools import groupby
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel

from src.common.errors import EmptyTrajectory, OutOfBounds, RecordParseError
from src.common.models import GpsPoint, GridSpec, PreprocessConfig, StayPoint, haversine_np, to_token
from src.common.utils.config import get_config
from src.common.utils.io import iter_jsonl, read_json, write_json, write_jsonl
from src.common.utils.logger import logger
from src.preprocess.models import (
    AgentFailure,
    CorpusStats,
    DatasetMeta,
    GpsFix,
    RawTrajectory,
    SkippedSubtrajectory,
    Split,
    SplitStats,
    Subtrajectory,
    TokenDataset,
    TokenSequence,
)

_SCAN_BLOCK = 64


def _first_beyond(lat: np.ndarray, lon: np.ndarray, i: int, radius_m: float) -> int:
    """Smallest j > i whose fix is farther than `radius_m` from fix i, or len(lat)."""
    n = len(lat)
    start, block = i + 1, _SCAN_BLOCK
    while start < n:
        end = min(n, start + block)
        far = np.flatnonzero(haversine_np(lat[i], lon[i], lat[start:end], lon[start:end]) > radius_m)
        if far.size:
            return start + int(far[0])
        start, block = end, block * 2
    return n


def detect_stay_points(traj: RawTrajectory, cfg: PreprocessConfig | None = None) -> list[StayPoint]:
    """Two-pointer stay point detection.

    For anchor i, j is the first later fix outside `spd_radius_m`. Fixes i..j-1 form a stay when
    the time from t_i to t_j (to the last fix when no such j exists) exceeds `spd_duration_s` and
    the window spans a positive dwell. The scan then resumes at j, otherwise at i + 1.

    Raises:
        EmptyTrajectory: if the trajectory has no fixes.
    """
    cfg = cfg or get_config().preprocess
    if not traj.points:
        raise EmptyTrajectory(f"agent {traj.agent_id!r} has no fixes")

    lat = np.fromiter((p.lat for p in traj.points), dtype=np.float64, count=len(traj.points))
    lon = np.fromiter((p.lon for p in traj.points), dtype=np.float64, count=len(traj.points))
    ts = np.fromiter((p.t for p in traj.points), dtype=np.int64, count=len(traj.points))
    n = len(ts)

    stays: list[StayPoint] = []
    i = 0
    while i < n:
        j = _first_beyond(lat, lon, i, cfg.spd_radius_m)
        t_end = ts[j] if j < n else ts[n - 1]
        if t_end - ts[i] > cfg.spd_duration_s and ts[j - 1] > ts[i]:
            stays.append(
                StayPoint(
                    lat=float(lat[i:j].mean()),
                    lon=float(lon[i:j].mean()),
                    t_arrive=int(ts[i]),
                    t_depart=int(ts[j - 1]),
                )
            )
            i = j
        else:
            i += 1
    return stays


def partition(
    stays: Sequence[StayPoint],
    cfg: PreprocessConfig | None = None,
    agent_id: str = "",
) -> list[Subtrajectory]:
    """Cut a stay sequence after long dwells (shared boundary) and at long transitions (hard cut).

    Pieces shorter than two stays are dropped.
    """
    cfg = cfg or get_config().preprocess
    if not stays:
        return []
    pieces: list[list[StayPoint]] = []
    current: list[StayPoint] = []
    for stay in stays:
        if current and stay.t_arrive - current[-1].t_depart > cfg.transition_split_s:
            pieces.append(current)
            current = []
        current.append(stay)
        if stay.dwell_s >= cfg.long_stay_split_s:
            pieces.append(current)
            current = [stay]
    pieces.append(current)
    return [Subtrajectory(agent_id=agent_id, stays=p) for p in pieces if len(p) >= 2]


def tokenize(
    sub: Subtrajectory,
    g: GridSpec,
    cfg: PreprocessConfig | None = None,
    subtraj_id: int = 0,
) -> TokenSequence | None:
    """Map stays to grid tokens, collapse repeats if configured, truncate to `w_max`.

    Returns:
        TokenSequence | None: None when fewer than two tokens remain.

    Raises:
        OutOfBounds: if a stay lies outside the grid.
    """
    cfg = cfg or get_config().preprocess
    tagged = [(to_token(s, g), s) for s in sub.stays]
    if cfg.collapse_repeats:
        runs = [list(run) for _, run in groupby(tagged, key=lambda pair: pair[0])]
    else:
        runs = [[pair] for pair in tagged]
    runs = runs[: cfg.w_max]
    if len(runs) < 2:
        return None
    return TokenSequence(
        subtraj_id=subtraj_id,
        agent_id=sub.agent_id,
        tokens=[run[0][0] for run in runs],
        t_start=runs[0][0][1].t_arrive,
        t_end=runs[-1][-1][1].t_depart,
    )


class _AgentOutput(BaseModel):
    agent_id: str
    sequences: list[TokenSequence] = []
    skipped: list[SkippedSubtrajectory] = []
    n_stays: int = 0
    n_subtrajectories: int = 0
    failure: AgentFailure | None = None


def _preprocess_agent(traj: RawTrajectory, g: GridSpec, cfg: PreprocessConfig) -> _AgentOutput:
    """Stay points, partition and tokens for one agent; out-of-grid subtrajectories are skipped alone."""
    try:
        stays = detect_stay_points(traj, cfg)
    except EmptyTrajectory as e:
        failure = AgentFailure(agent_id=traj.agent_id, error=str(e))
        return _AgentOutput(agent_id=traj.agent_id, failure=failure)
    subs = partition(stays, cfg, agent_id=traj.agent_id)
    sequences: list[TokenSequence] = []
    skipped: list[SkippedSubtrajectory] = []
    for sub in subs:
        try:
            seq = tokenize(sub, g, cfg)
        except OutOfBounds as e:
            skipped.append(
                SkippedSubtrajectory(
                    agent_id=traj.agent_id,
                    t_start=sub.stays[0].t_arrive,
                    t_end=sub.stays[-1].t_depart,
                    error=str(e),
                )
            )
            continue
        if seq is not None:
            sequences.append(seq)
    return _AgentOutput(
        agent_id=traj.agent_id,
        sequences=sequences,
        skipped=skipped,
        n_stays=len(stays),
        n_subtrajectories=len(subs),
    )


def _split_stats(sequences: list[TokenSequence]) -> SplitStats:
    if not sequences:
        return SplitStats()
    lengths = [len(s.tokens) for s in sequences]
    return SplitStats(
        n_agents=len({s.agent_id for s in sequences}),
        n_sequences=len(sequences),
        min_length=min(lengths),
        max_length=max(lengths),
    )


def split_time(trajs: Sequence[RawTrajectory], train_fraction: float) -> int:
    """Timestamp dividing the corpus timeline into train and test parts."""
    stamps = [p.t for tr in trajs for p in (tr.points[:1] + tr.points[-1:])]
    if not stamps:
        return 0
    t_min, t_max = min(stamps), max(stamps)
    return t_min + int(train_fraction * (t_max - t_min))


def preprocess_corpus(
    trajs: Sequence[RawTrajectory],
    g: GridSpec | None = None,
    cfg: PreprocessConfig | None = None,
    workers: int = 1,
) -> TokenDataset:
    """Run the full pipeline for every agent and collect corpus statistics.

    Per-agent failures are reported in `stats.failures` and do not abort the corpus. A subtrajectory
    with a stay outside the grid is dropped on its own and listed in `stats.skipped`. Output order
    is (agent_id, t_start) whatever the worker count.

    Args:
        trajs: one trajectory per agent.
        g: grid; anchored on the data bounding box when omitted.
        cfg: preprocessing thresholds; the active config when omitted.
        workers: joblib worker count for per-agent fan-out.
    """
    cfg = cfg or get_config().preprocess
    ordered = sorted(trajs, key=lambda tr: tr.agent_id)
    if g is None:
        points = [p for tr in ordered for p in tr.points]
        g = GridSpec.covering(points, cfg.cell_size_m) if points else GridSpec(
            origin_lat=0.0, origin_lon=0.0, cell_size_m=cfg.cell_size_m, n_rows=1, n_cols=1
        )

    outputs: list[_AgentOutput] = Parallel(n_jobs=workers)(
        delayed(_preprocess_agent)(tr, g, cfg) for tr in ordered
    )

    cut = split_time(ordered, cfg.train_fraction)
    sequences: list[TokenSequence] = []
    failures: list[AgentFailure] = []
    skipped = [s for out in outputs for s in out.skipped]
    for out in outputs:
        if out.failure is not None:
            logger.warning("Preprocessing failed for agent %s: %s", out.agent_id, out.failure.error)
            failures.append(out.failure)
            continue
        for seq in sorted(out.sequences, key=lambda s: s.t_start):
            split: Split = "train" if seq.t_start < cut else "test"
            sequences.append(seq.model_copy(update={"subtraj_id": len(sequences), "split": split}))

    lengths = [len(s.tokens) for s in sequences]
    stats = CorpusStats(
        n_agents=len({s.agent_id for s in sequences}),
        n_fixes=sum(len(tr.points) for tr in ordered),
        n_stays=sum(o.n_stays for o in outputs),
        n_subtrajectories=sum(o.n_subtrajectories for o in outputs),
        split_time=cut,
        train=_split_stats([s for s in sequences if s.split == "train"]),
        test=_split_stats([s for s in sequences if s.split == "test"]),
        min_length=min(lengths, default=0),
        max_length=max(lengths, default=0),
        failures=failures,
        skipped=skipped,
    )
    if skipped:
        logger.warning("Skipped %d subtrajectories with stays outside the grid", len(skipped))
    logger.info(
        "Preprocessed %d agents: %d stays, %d sequences (%d train / %d test), lengths [%d, %d], %d failures",
        len(ordered),
        stats.n_stays,
        len(sequences),
        stats.train.n_sequences,
        stats.test.n_sequences,
        stats.min_length,
        stats.max_length,
        len(failures),
    )
    return TokenDataset(grid=g, config=cfg, sequences=sequences, stats=stats)


def load_trajectories(path: str | Path) -> list[RawTrajectory]:
    """Read fix-per-line JSONL sorted by (agent_id, t) into one trajectory per agent."""
    trajs: list[RawTrajectory] = []
    last: tuple[str, int] | None = None
    points: list[GpsPoint] = []
    for record, fix in enumerate(iter_jsonl(path, GpsFix), start=1):
        key = (fix.agent_id, fix.t)
        if last is not None and key <= last:
            raise RecordParseError(str(path), record, f"not sorted by (agent_id, t): {key} after {last}")
        if last is not None and fix.agent_id != last[0]:
            trajs.append(RawTrajectory(agent_id=last[0], points=points))
            points = []
        points.append(fix.point())
        last = key
    if last is not None:
        trajs.append(RawTrajectory(agent_id=last[0], points=points))
    logger.info("Loaded %d trajectories from %s", len(trajs), path)
    return trajs


def write_dataset(dataset: TokenDataset, path: str | Path, meta_path: str | Path) -> None:
    write_jsonl(path, dataset.sequences)
    meta = DatasetMeta(grid=dataset.grid, config=dataset.config, stats=dataset.stats)
    write_json(meta_path, meta.model_dump(mode="json"))


def read_dataset(path: str | Path, meta_path: str | Path) -> TokenDataset:
    meta = DatasetMeta.model_validate(read_json(meta_path))
    sequences = list(iter_jsonl(path, TokenSequence))
    return TokenDataset(grid=meta.grid, config=meta.config, sequences=sequences, stats=meta.stats)
