"""Glue between the stages: POI context, per-mode training/scoring/evaluation and the ablation."""

from collections.abc import Mapping, Sequence
from pathlib import Path

from src.common.errors import DegenerateLabels
from src.common.models import ContextMode, HyperParams, PoiContextConfig
from src.common.utils.config import get_config
from src.common.utils.io import write_json
from src.common.utils.logger import logger
from src.cvae import ablation_context, agent_table, save_checkpoint, score_sequences, train, write_scores
from src.pipeline.models import AblationResult, ModeResult, PoiContext
from src.poi import Poi, baseline_category_vectors, embed_corpus, fit_clusters, grid_vectors
from src.preprocess import TokenDataset
from src.scoring import (
    ablation_report,
    agent_level,
    pr_curve,
    write_agent_scores,
    write_curve,
    write_report,
)

ABLATION_MODES = tuple(ContextMode)


def build_poi_context(
    pois: Sequence[Poi], dataset: TokenDataset, cfg: PoiContextConfig | None = None
) -> PoiContext:
    """Embed and cluster POIs, then count them per cell of the dataset's grid."""
    cfg = cfg or get_config().poi
    embeddings = embed_corpus(pois, cfg.radius_m)
    clusters = fit_clusters(embeddings, cfg.n_clusters, cfg.seed)
    return PoiContext(
        clusters=clusters,
        contextual=grid_vectors(pois, clusters, dataset.grid, embeddings),
        categories=baseline_category_vectors(pois, dataset.grid),
    )


def artifact_paths(out: str | Path, mode: ContextMode) -> dict[str, Path]:
    out = Path(out)
    return {
        "checkpoint": out / f"checkpoint_{mode.value}.bin",
        "loss": out / f"loss_{mode.value}.json",
        "scores": out / f"scores_{mode.value}.csv",
        "agent_scores": out / f"agent_scores_{mode.value}.csv",
        "pr": out / f"pr_{mode.value}.json",
    }


def run_mode(
    dataset: TokenDataset,
    poi: PoiContext | None,
    mode: ContextMode | str,
    labels: Mapping[str, int] | None = None,
    hp: HyperParams | None = None,
    threads: int = 1,
    out: str | Path | None = None,
) -> ModeResult:
    """Train on the train split, score the test split and evaluate against `labels`."""
    hp = hp or get_config().model
    mode = ContextMode.parse(mode)
    train_seqs, test_seqs = dataset.split("train"), dataset.split("test")
    agents = agent_table([s.agent_id for s in train_seqs])
    builder = ablation_context(
        mode,
        agents,
        contextual=poi.contextual if poi else None,
        categories=poi.categories if poi else None,
    )
    logger.info("[%s] training on %d sequences, scoring %d", mode.slug, len(train_seqs), len(test_seqs))

    trained = train(train_seqs, builder, dataset.grid.vocab_size, hp)
    scores = score_sequences(trained.model, test_seqs, builder, hp.mc_samples, hp.seed, threads)
    agent_scores = agent_level(scores)
    curve = None
    if labels is not None:
        try:
            curve = pr_curve(agent_scores, labels)
            logger.info("[%s] average precision %.4f", mode.slug, curve.average_precision)
        except DegenerateLabels as e:
            logger.warning("[%s] no precision-recall curve: %s", mode.slug, e)

    result = ModeResult(
        mode=mode,
        model=trained.model,
        agent_table=agents,
        trace=trained.trace,
        scores=scores,
        agent_scores=agent_scores,
        curve=curve,
    )
    if out is not None:
        write_mode(out, result, hp.seed)
    return result


def write_mode(out: str | Path, result: ModeResult, seed: int) -> dict[str, Path]:
    paths = artifact_paths(out, result.mode)
    save_checkpoint(paths["checkpoint"], result.model, result.agent_table, seed)
    write_json(paths["loss"], [e.model_dump() for e in result.trace])
    write_scores(paths["scores"], result.scores)
    write_agent_scores(paths["agent_scores"], result.agent_scores)
    if result.curve is not None:
        write_curve(paths["pr"], result.curve)
    return paths


def run_ablation(
    dataset: TokenDataset,
    poi: PoiContext,
    labels: Mapping[str, int],
    hp: HyperParams | None = None,
    threads: int = 1,
    out: str | Path | None = None,
    modes: Sequence[ContextMode] = ABLATION_MODES,
) -> AblationResult:
    """Every context mode on the same data and seed; a failing mode is reported and skipped."""
    results: dict[ContextMode, ModeResult] = {}
    errors: dict[ContextMode, str] = {}
    for mode in modes:
        try:
            results[mode] = run_mode(dataset, poi, mode, labels, hp, threads, out)
        except Exception as e:
            logger.error("[%s] failed: %s", mode.slug, e)
            errors[mode] = str(e)
        else:
            if results[mode].curve is None:
                errors[mode] = "no usable labels"

    report = ablation_report({m: results[m].curve if m in results else None for m in modes}, errors)
    if out is not None:
        write_report(Path(out) / "ablation.csv", Path(out) / "ablation.md", report)
    return AblationResult(report=report, results=results)
