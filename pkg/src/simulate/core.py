"""Synthetic cities, personal routines, injected anomalies and rendered GPS traces."""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from numpy.typing import NDArray

from src.common.errors import ConfigError
from src.common.models import (
    AnomalyKind,
    GpsPoint,
    GridSpec,
    GridToken,
    SimConfig,
    haversine_m,
    to_token,
    token_cell,
)
from src.common.models.base import DEG_TO_M
from src.common.utils.config import get_config
from src.common.utils.io import read_json, write_json, write_jsonl
from src.common.utils.logger import logger
from src.poi import Poi, write_pois
from src.preprocess import GpsFix, RawTrajectory
from src.scoring import write_labels
from src.simulate.models import (
    City,
    DayPlan,
    GroundTruth,
    InjectedWindow,
    Purpose,
    Routine,
    SimMeta,
    Simulation,
    Visit,
    Zone,
    ZoneKind,
    ZoneMap,
)

DAY_S = 86_400
HOUR_S = 3_600

# seed-stream keys
_CITY, _AGENTS, _ANOMALIES, _GPS = 0, 1, 2, 3

CELLS_PER_ZONE = 36
ZONE_CYCLE = [ZoneKind.RESIDENTIAL, ZoneKind.RESIDENTIAL, ZoneKind.COMMERCIAL, ZoneKind.CAMPUS]
ZONE_SHARE = {
    ZoneKind.RESIDENTIAL: 0.45,
    ZoneKind.COMMERCIAL: 0.30,
    ZoneKind.CAMPUS: 0.15,
    ZoneKind.AIRPORT: 0.10,
}
ZONE_CATEGORIES: dict[ZoneKind, dict[str, float]] = {
    ZoneKind.RESIDENTIAL: {"residence": 0.70, "shop": 0.08, "park": 0.08, "cafe": 0.06, "school": 0.05},
    ZoneKind.COMMERCIAL: {"office": 0.45, "restaurant": 0.15, "shop": 0.15, "cafe": 0.12, "hotel": 0.08},
    ZoneKind.CAMPUS: {"school": 0.45, "library": 0.25, "cafe": 0.12, "park": 0.08, "office": 0.05},
    ZoneKind.AIRPORT: {"terminal": 0.50, "hotel": 0.25, "restaurant": 0.10, "shop": 0.10, "office": 0.05},
}
# categories missing from a zone table get OTHER_CATEGORY_WEIGHT
OTHER_CATEGORY_WEIGHT = 0.02
CELL_MARGIN = 0.1  # POIs stay this fraction of a cell away from its edges

WORK_CATEGORIES = ("office", "school")
LEISURE_CATEGORIES = ("cafe", "restaurant", "shop", "park", "library")
MIN_ANCHOR_DISTANCE_M = 1_000.0


def _stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed, *keys])


def _zone_kinds(n_zones: int) -> list[ZoneKind]:
    head = [ZoneKind.RESIDENTIAL, ZoneKind.COMMERCIAL, ZoneKind.CAMPUS, ZoneKind.AIRPORT]
    tail = [ZONE_CYCLE[i % len(ZONE_CYCLE)] for i in range(max(0, n_zones - len(head)))]
    return (head + tail)[:n_zones]


def _zone_map(g: GridSpec, rng: np.random.Generator) -> ZoneMap:
    n_zones = min(g.vocab_size, max(4, g.vocab_size // CELLS_PER_ZONE))
    centers = np.sort(rng.choice(g.vocab_size, size=n_zones, replace=False))
    center_rc = np.array([token_cell(int(c), g) for c in centers], dtype=np.float64)
    cells = np.array([token_cell(t, g) for t in range(g.vocab_size)], dtype=np.float64)
    d2 = ((cells[:, None, :] - center_rc[None, :, :]) ** 2).sum(axis=2)
    kinds = _zone_kinds(n_zones)
    zones = [
        Zone(zone_id=i, kind=k, center=int(c)) for i, (k, c) in enumerate(zip(kinds, centers, strict=True))
    ]
    return ZoneMap(zones=zones, cell_zone=[int(z) for z in d2.argmin(axis=1)])


def _category_weights(kind: ZoneKind, categories: Sequence[str]) -> NDArray[np.float64]:
    table = ZONE_CATEGORIES[kind]
    w = np.array([table.get(c, OTHER_CATEGORY_WEIGHT) for c in categories], dtype=np.float64)
    return w / w.sum()


def _point_in_cell(token: GridToken, g: GridSpec, rng: np.random.Generator) -> tuple[float, float]:
    row, col = token_cell(token, g)
    fx, fy = rng.uniform(CELL_MARGIN, 1.0 - CELL_MARGIN, size=2)
    return g.unproject((col + fx) * g.cell_size_m, (row + fy) * g.cell_size_m)


def gen_city(cfg: SimConfig | None = None) -> City:
    """Zone the grid and place POIs with zone-dependent category mixes.

    Zones are Voronoi regions around random center cells; each zone has one archetype.
    """
    cfg = cfg or get_config().simulate
    g = cfg.grid
    rng = _stream(cfg.seed, _CITY)
    zones = _zone_map(g, rng)

    present = sorted({z.kind for z in zones.zones}, key=list(ZoneKind).index)
    share = np.array([ZONE_SHARE[k] for k in present])
    share /= share.sum()
    zones_of = {k: [z.zone_id for z in zones.zones if z.kind is k] for k in present}
    cells_of = {z.zone_id: zones.cells(z.zone_id) for z in zones.zones}
    weights = {k: _category_weights(k, cfg.categories) for k in present}

    pois: list[Poi] = []
    for i in range(cfg.n_pois):
        kind = present[int(rng.choice(len(present), p=share))]
        zone_id = zones_of[kind][int(rng.integers(len(zones_of[kind])))]
        cell = cells_of[zone_id][int(rng.integers(len(cells_of[zone_id])))]
        category = cfg.categories[int(rng.choice(len(cfg.categories), p=weights[kind]))]
        lat, lon = _point_in_cell(cell, g, rng)
        pois.append(Poi(poi_id=f"poi_{i:05d}", name=f"{category} {i}", category=category, lat=lat, lon=lon))
    logger.info("Generated city: %d zones, %d POIs", len(zones.zones), len(pois))
    return City(grid=g, zones=zones, pois=pois)


def _visit(poi: Poi, t_arrive: int, t_depart: int, purpose: Purpose) -> Visit:
    return Visit(
        poi_id=poi.poi_id, lat=poi.lat, lon=poi.lon, t_arrive=t_arrive, t_depart=t_depart, purpose=purpose
    )


def _travel_s(a: Poi | Visit, b: Poi | Visit, cfg: SimConfig) -> int:
    return int(round(haversine_m(a, b) / cfg.travel_speed_mps))


def _tour(
    home: Poi,
    day: int,
    leave: int,
    stops: Sequence[tuple[Poi, int, Purpose]],
    cfg: SimConfig,
) -> DayPlan:
    """home -> stops (poi, dwell, purpose) -> home, departing home at `leave`."""
    day_start = cfg.t0 + day * DAY_S
    visits = [_visit(home, day_start, leave, "home")]
    t, here = leave, home
    for poi, dwell, purpose in stops:
        t += _travel_s(here, poi, cfg)
        visits.append(_visit(poi, t, t + dwell, purpose))
        t, here = t + dwell, poi
    t += _travel_s(here, home, cfg)
    visits.append(_visit(home, t, day_start + DAY_S, "home"))
    return DayPlan(day=day, visits=visits)


def _is_weekday(day: int) -> bool:
    return day % 7 < 5


def _day_plan(routine: Routine, day: int, rng: np.random.Generator, cfg: SimConfig) -> DayPlan:
    day_start = cfg.t0 + day * DAY_S
    if _is_weekday(day):
        leave = day_start + int(np.clip(rng.normal(7.75, 0.4), 6.5, 9.0) * HOUR_S)
        work_dwell = int(np.clip(rng.normal(8.5, 0.75), 5.0, 10.0) * HOUR_S)
        stops: list[tuple[Poi, int, Purpose]] = [(routine.work, work_dwell, "work")]
        if routine.leisure and rng.random() < 0.5:
            venue = routine.leisure[int(rng.integers(len(routine.leisure)))]
            stops.append((venue, int(rng.uniform(1.0, 2.0) * HOUR_S), "leisure"))
        plan = _tour(routine.home, day, leave, stops, cfg)
        if plan.visits[-1].t_arrive > day_start + 23 * HOUR_S:
            plan = _tour(routine.home, day, leave, stops[:1], cfg)
        return plan

    leave = day_start + int(rng.uniform(9.5, 11.5) * HOUR_S)
    stops = []
    if routine.leisure:
        k = min(len(routine.leisure), int(rng.integers(1, 3)))
        for j in rng.choice(len(routine.leisure), size=k, replace=False):
            stops.append((routine.leisure[int(j)], int(rng.uniform(1.5, 3.0) * HOUR_S), "leisure"))
    return _tour(routine.home, day, leave, stops, cfg)


def _pick(candidates: Sequence[Poi], rng: np.random.Generator) -> Poi:
    return candidates[int(rng.integers(len(candidates)))]


def _anchors(
    rng: np.random.Generator,
    homes: Sequence[Poi],
    works: Sequence[Poi],
    leisure: Sequence[Poi],
) -> tuple[Poi, Poi, list[Poi]]:
    home = _pick(homes, rng)
    far_works = [w for w in works if haversine_m(home, w) >= MIN_ANCHOR_DISTANCE_M]
    work = _pick(far_works or works, rng)

    far = [p for p in leisure if min(haversine_m(home, p), haversine_m(work, p)) >= MIN_ANCHOR_DISTANCE_M]
    pool = far or list(leisure)
    k = min(len(pool), int(rng.integers(2, 5)))
    chosen = [pool[int(j)] for j in sorted(rng.choice(len(pool), size=k, replace=False))] if k else []
    return home, work, chosen


def _gen_agent(idx: int, city: City, cfg: SimConfig) -> Routine:
    rng = _stream(cfg.seed, _AGENTS, idx)
    homes = [p for p in city.pois if p.category == "residence"]
    works = [p for p in city.pois if p.category in WORK_CATEGORIES]
    leisure = [p for p in city.pois if p.category in LEISURE_CATEGORIES]
    home, work, venues = _anchors(rng, homes, works, leisure)
    routine = Routine(agent_id=f"agent_{idx:04d}", home=home, work=work, leisure=venues, days=[])
    routine.days = [_day_plan(routine, day, rng, cfg) for day in range(cfg.n_days)]
    return routine


def gen_agents(cfg: SimConfig | None = None, city: City | None = None, workers: int = 1) -> list[Routine]:
    """Anchors and day-by-day plans for every agent, each from its own seed substream.

    Raises:
        ConfigError: if the city lacks residence or work POIs.
    """
    cfg = cfg or get_config().simulate
    city = city or gen_city(cfg)
    if not any(p.category == "residence" for p in city.pois):
        raise ConfigError("the city has no residence POIs to place homes")
    if not any(p.category in WORK_CATEGORIES for p in city.pois):
        raise ConfigError("the city has no office or school POIs to place workplaces")
    routines: list[Routine] = Parallel(n_jobs=workers)(
        delayed(_gen_agent)(idx, city, cfg) for idx in range(cfg.n_agents)
    )
    logger.info("Generated routines for %d agents over %d days", len(routines), cfg.n_days)
    return routines


def anomaly_days(cfg: SimConfig) -> range:
    """Days whose sequences (including the previous evening's home stay) fall in the test half."""
    first = (cfg.n_days + 1) // 2 + 1
    return range(first, cfg.n_days) if first < cfg.n_days else range(cfg.n_days - 1, cfg.n_days)


def _habitual_cells(routine: Routine, g: GridSpec, until_day: int) -> set[GridToken]:
    return {to_token(v, g) for plan in routine.days[:until_day] for v in plan.visits}


def _cell_histograms(city: City) -> dict[GridToken, NDArray[np.float64]]:
    categories = sorted({p.category for p in city.pois})
    index = {c: k for k, c in enumerate(categories)}
    hist: dict[GridToken, NDArray[np.float64]] = {}
    for p in city.pois:
        h = hist.setdefault(to_token(p, city.grid), np.zeros(len(categories)))
        h[index[p.category]] += 1.0
    return {t: h / h.sum() for t, h in hist.items()}


def _donor(
    routine: Routine,
    day: int,
    others: Sequence[Routine],
    habitual: set[GridToken],
    g: GridSpec,
) -> Routine:
    """Prefer a donor whose day reaches new cells; among those, shared home cell, then nearest home."""
    home_cell = to_token(routine.home, g)

    def rank(other: Routine) -> tuple[bool, bool, float, str]:
        novel = any(to_token(v, g) not in habitual for v in other.days[day].activities)
        shares_home = to_token(other.home, g) == home_cell
        return (not novel, not shares_home, haversine_m(routine.home, other.home), other.agent_id)

    return min(others, key=rank)


def _borrowed_day(routine: Routine, donor: Routine, day: int, cfg: SimConfig) -> DayPlan:
    """The donor's activities at the donor's times, travelled to from the agent's own home."""
    day_start = cfg.t0 + day * DAY_S
    acts = [v.model_copy(update={"purpose": "anomaly"}) for v in donor.days[day].activities]
    if not acts:
        return routine.days[day]
    leave = max(day_start + 1, acts[0].t_arrive - _travel_s(routine.home, acts[0], cfg))
    back = acts[-1].t_depart + _travel_s(acts[-1], routine.home, cfg)
    visits = [_visit(routine.home, day_start, leave, "home"), *acts]
    visits.append(_visit(routine.home, back, max(back + 1, day_start + DAY_S), "home"))
    return DayPlan(day=day, visits=visits)


def _spatial_day(
    routine: Routine,
    day: int,
    city: City,
    hist: dict[GridToken, NDArray[np.float64]],
    habitual: set[GridToken],
    rng: np.random.Generator,
    cfg: SimConfig,
) -> DayPlan:
    """Two venues in the cells whose POI mix is farthest (L1) from the agent's habitual mix."""
    g = city.grid
    usual = [hist[t] for t in sorted(habitual) if t in hist]
    mean = np.mean(usual, axis=0) if usual else np.zeros(len(next(iter(hist.values()))))
    candidates = [t for t in sorted(hist) if t not in habitual] or sorted(hist)
    far = sorted(candidates, key=lambda t: (-float(np.abs(hist[t] - mean).sum()), t))[:2]
    by_cell: dict[GridToken, list[Poi]] = {}
    for p in city.pois:
        by_cell.setdefault(to_token(p, g), []).append(p)
    venues = [_pick(by_cell[t], rng) for t in far]
    leave = cfg.t0 + day * DAY_S + int(rng.uniform(9.5, 11.0) * HOUR_S)
    stops: list[tuple[Poi, int, Purpose]] = [
        (v, int(rng.uniform(1.5, 2.5) * HOUR_S), "anomaly") for v in venues
    ]
    return _tour(routine.home, day, leave, stops, cfg)


def inject_anomalies(
    cfg: SimConfig | None,
    routines: Sequence[Routine],
    city: City,
) -> tuple[GroundTruth, list[Routine]]:
    """Replace one test-half day of a fraction of agents with an anomalous day.

    `agent_atypical` copies another agent's day (plausible in general, unusual for this agent);
    `spatial_atypical` sends the agent to cells whose POI mix differs most from its usual cells.
    Training-half days are never modified.

    Raises:
        ConfigError: if the anomaly rate selects a fraction of one agent.
    """
    cfg = cfg or get_config().simulate
    expected = cfg.anomaly_rate * len(routines)
    if 0 < expected < 1:
        raise ConfigError(f"anomaly_rate {cfg.anomaly_rate} x {len(routines)} agents selects no whole agent")
    n_anomalous = int(round(expected))
    rng = _stream(cfg.seed, _ANOMALIES)
    chosen = sorted(int(i) for i in rng.choice(len(routines), size=n_anomalous, replace=False))
    kinds = list(cfg.anomaly_kinds)
    weights = np.array([cfg.anomaly_kinds[k] for k in kinds], dtype=np.float64)
    weights /= weights.sum()
    days = anomaly_days(cfg)
    first_test_day = days[0]
    hist = _cell_histograms(city) if n_anomalous else {}
    chosen_set = set(chosen)
    normal = [r for i, r in enumerate(routines) if i not in chosen_set]

    out = list(routines)
    windows: list[InjectedWindow] = []
    for i in chosen:
        routine = routines[i]
        kind: AnomalyKind = kinds[int(rng.choice(len(kinds), p=weights))]
        day = int(days[int(rng.integers(len(days)))])
        habitual = _habitual_cells(routine, city.grid, first_test_day)
        donor_id = None
        if kind is AnomalyKind.AGENT_ATYPICAL:
            pool = normal or [r for r in routines if r.agent_id != routine.agent_id]
            donor = _donor(routine, day, pool, habitual, city.grid)
            plan = _borrowed_day(routine, donor, day, cfg)
            donor_id = donor.agent_id
        else:
            plan = _spatial_day(routine, day, city, hist, habitual, rng, cfg)
        days_out = list(routine.days)
        days_out[day] = plan
        out[i] = routine.model_copy(update={"days": days_out})
        windows.append(
            InjectedWindow(
                agent_id=routine.agent_id,
                t_start=plan.visits[0].t_depart,
                t_end=plan.visits[-1].t_arrive,
                kind=kind,
                day=day,
                donor_id=donor_id,
            )
        )
        logger.debug("Injected %s anomaly for %s on day %d", kind.value, routine.agent_id, day)

    labels = {r.agent_id: int(i in chosen_set) for i, r in enumerate(routines)}
    logger.info("Injected %d anomalies into %d agents", len(windows), len(routines))
    return GroundTruth(agent_labels=labels, injected_windows=windows), out


def _render_agent(idx: int, routine: Routine, cfg: SimConfig) -> RawTrajectory:
    visits = [v for plan in routine.days for v in plan.visits]
    knots_t = np.array([t for v in visits for t in (v.t_arrive, v.t_depart)], dtype=np.float64)
    knots_lat = np.repeat([v.lat for v in visits], 2)
    knots_lon = np.repeat([v.lon for v in visits], 2)

    start, end = int(knots_t[0]), int(knots_t[-1])
    first = cfg.t0 + -(-(start - cfg.t0) // cfg.fix_interval_s) * cfg.fix_interval_s
    ts = np.arange(first, end + 1, cfg.fix_interval_s, dtype=np.int64)
    lat = np.interp(ts, knots_t, knots_lat)
    lon = np.interp(ts, knots_t, knots_lon)

    if cfg.gps_noise_m > 0:
        rng = _stream(cfg.seed, _GPS, idx)
        noise = rng.normal(0.0, cfg.gps_noise_m, size=(2, len(ts)))
        lon = lon + noise[1] / (DEG_TO_M * np.cos(np.radians(lat)))
        lat = lat + noise[0] / DEG_TO_M

    points = [GpsPoint(lat=float(a), lon=float(o), t=int(t)) for a, o, t in zip(lat, lon, ts, strict=True)]
    return RawTrajectory(agent_id=routine.agent_id, points=points)


def render_gps(
    routines: Sequence[Routine], cfg: SimConfig | None = None, workers: int = 1
) -> list[RawTrajectory]:
    """Sample every agent's movement on a global fix grid (t0 + k * fix_interval_s).

    Between visits the agent moves at constant speed along the straight segment; each fix gets
    isotropic Gaussian noise of `gps_noise_m` meters.
    """
    cfg = cfg or get_config().simulate
    trajs: list[RawTrajectory] = Parallel(n_jobs=workers)(
        delayed(_render_agent)(idx, r, cfg) for idx, r in enumerate(routines)
    )
    logger.info("Rendered %d fixes for %d agents", sum(len(t.points) for t in trajs), len(trajs))
    return trajs


def write_trajectories(path: str | Path, trajs: Sequence[RawTrajectory]) -> int:
    """Fix-per-line JSONL sorted by (agent_id, t)."""
    fixes = (
        GpsFix(agent_id=tr.agent_id, lat=p.lat, lon=p.lon, t=p.t)
        for tr in sorted(trajs, key=lambda tr: tr.agent_id)
        for p in tr.points
    )
    return write_jsonl(path, fixes)


def sim_meta(cfg: SimConfig, city: City) -> SimMeta:
    return SimMeta(config=cfg, grid=city.grid, zones=city.zones, split_time=cfg.t0 + cfg.n_days * DAY_S // 2)


def write_city(pois_path: str | Path, meta_path: str | Path, cfg: SimConfig, city: City) -> None:
    write_pois(pois_path, city.pois)
    write_json(meta_path, sim_meta(cfg, city).model_dump(mode="json"))


def write_ground_truth(path: str | Path, truth: GroundTruth) -> None:
    write_json(path, truth.model_dump(mode="json"))


def simulate(cfg: SimConfig | None = None, workers: int = 1) -> Simulation:
    """City, routines, anomalies and GPS traces for one configuration."""
    cfg = cfg or get_config().simulate
    city = gen_city(cfg)
    truth, routines = inject_anomalies(cfg, gen_agents(cfg, city, workers), city)
    return Simulation(
        config=cfg,
        city=city,
        routines=routines,
        truth=truth,
        trajectories=render_gps(routines, cfg, workers),
    )


def write_simulation(out: str | Path, sim: Simulation) -> dict[str, Path]:
    """Write the simulator artifacts into directory `out`; returns name -> path."""
    out = Path(out)
    paths = {
        "trajectories": out / "trajectories.jsonl",
        "pois": out / "pois.csv",
        "labels": out / "labels.csv",
        "ground_truth": out / "ground_truth.json",
        "sim_meta": out / "sim_meta.json",
    }
    n_fixes = write_trajectories(paths["trajectories"], sim.trajectories)
    write_city(paths["pois"], paths["sim_meta"], sim.config, sim.city)
    write_labels(paths["labels"], sim.truth.agent_labels)
    write_ground_truth(paths["ground_truth"], sim.truth)
    logger.info("Wrote %d fixes and %d POIs to %s", n_fixes, len(sim.city.pois), out)
    return paths


def read_sim_meta(path: str | Path) -> SimMeta:
    return SimMeta.model_validate(read_json(path))


def read_ground_truth(path: str | Path) -> GroundTruth:
    return GroundTruth.model_validate(read_json(path))
