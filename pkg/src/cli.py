"""trajscope CLI: simulate -> preprocess -> embed-poi -> train -> score -> evaluate, plus the ablation.

Every command prints one JSON summary line on stdout; logs go to stderr. Exit codes: 0 success,
1 validation error (bad input, config or missing file), 2 runtime failure.
"""

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import torch
from pydantic import BaseModel, ValidationError

from src.common.errors import ConfigError
from src.common.models import ContextMode, RunConfig
from src.common.utils.config import load_config, set_config
from src.common.utils.io import atomic_open, write_csv, write_json
from src.common.utils.logger import logger
from src.common.utils.statistics import statistics
from src.cvae import (
    ablation_context,
    agent_table,
    load_checkpoint,
    read_scores,
    save_checkpoint,
    score_sequences,
    train,
    write_scores,
)
from src.pipeline import PoiContext, artifact_paths, build_poi_context, run_ablation
from src.poi import (
    cluster_report,
    load_clusters,
    load_grid_vectors,
    read_pois,
    save_clusters,
    save_grid_vectors,
)
from src.preprocess import load_trajectories, preprocess_corpus, read_dataset, write_dataset
from src.preprocess.models import TokenDataset
from src.scoring import agent_level, pr_curve, read_labels, write_agent_scores, write_curve
from src.simulate import read_sim_meta, simulate, write_simulation

CONFIG_SECTIONS = ("simulate", "preprocess", "poi", "model")

Summary = dict[str, Any]


class Workspace:
    """Artifact locations inside `--out`."""

    def __init__(self, out: Path):
        self.out = out
        self.trajectories = out / "trajectories.jsonl"
        self.pois = out / "pois.csv"
        self.labels = out / "labels.csv"
        self.sim_meta = out / "sim_meta.json"
        self.dataset = out / "dataset.jsonl"
        self.dataset_meta = out / "dataset_meta.json"
        self.stats = out / "dataset_stats.md"
        self.clusters = out / "clusters.json"
        self.grid_vectors = out / "grid_vectors.jsonl"
        self.grid_categories = out / "grid_categories.jsonl"
        self.cluster_report = out / "cluster_report.csv"

    def load_dataset(self) -> TokenDataset:
        return read_dataset(self.dataset, self.dataset_meta)

    def poi_context(self) -> PoiContext | None:
        if not self.clusters.exists():
            return None
        return PoiContext(
            clusters=load_clusters(self.clusters),
            contextual=load_grid_vectors(self.grid_vectors),
            categories=load_grid_vectors(self.grid_categories),
        )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def cmd_simulate(args: argparse.Namespace, cfg: RunConfig, ws: Workspace) -> Summary:
    sim = simulate(cfg.simulate, workers=1)
    paths = write_simulation(ws.out, sim)
    return {
        "n_agents": len(sim.routines),
        "n_anomalous": sim.truth.n_anomalous,
        "n_pois": len(sim.city.pois),
        "n_fixes": sum(len(t.points) for t in sim.trajectories),
        "artifacts": sorted(str(p) for p in paths.values()),
    }


def cmd_preprocess(args: argparse.Namespace, cfg: RunConfig, ws: Workspace) -> Summary:
    trajs = load_trajectories(args.input or ws.trajectories)
    grid = None
    if not args.fit_grid and ws.sim_meta.exists():
        grid = read_sim_meta(ws.sim_meta).grid
    dataset = preprocess_corpus(trajs, grid, cfg.preprocess, workers=1)
    if ws.pois.exists():
        dataset.stats.n_pois = len(read_pois(ws.pois))
    write_dataset(dataset, ws.dataset, ws.dataset_meta)
    with atomic_open(ws.stats) as f:
        f.write(dataset.stats.markdown)
    logger.info("Corpus statistics:\n%s", dataset.stats.markdown)
    return {
        "stats": dataset.stats.model_dump(mode="json", exclude={"failures", "skipped"}),
        "n_failures": len(dataset.stats.failures),
        "n_skipped": len(dataset.stats.skipped),
        "grid": dataset.grid.model_dump(),
    }


def cmd_embed_poi(args: argparse.Namespace, cfg: RunConfig, ws: Workspace) -> Summary:
    pois = read_pois(args.pois or ws.pois)
    dataset = ws.load_dataset()
    ctx = build_poi_context(pois, dataset, cfg.poi)
    save_clusters(ws.clusters, ctx.clusters)
    save_grid_vectors(ws.grid_vectors, ctx.contextual)
    save_grid_vectors(ws.grid_categories, ctx.categories)
    write_csv(ws.cluster_report, cluster_report(ctx.contextual, dataset.grid))
    return {
        "n_pois": len(pois),
        "n_clusters": ctx.clusters.K,
        "inertia": ctx.clusters.inertia,
        "skipped_pois": ctx.contextual.skipped,
    }


def cmd_train(args: argparse.Namespace, cfg: RunConfig, ws: Workspace) -> Summary:
    dataset = ws.load_dataset()
    poi = ws.poi_context()
    train_seqs = dataset.split("train")
    agents = agent_table([s.agent_id for s in train_seqs])
    builder = ablation_context(
        cfg.run.mode,
        agents,
        contextual=poi.contextual if poi else None,
        categories=poi.categories if poi else None,
    )
    trained = train(train_seqs, builder, dataset.grid.vocab_size, cfg.model)
    paths = artifact_paths(ws.out, cfg.run.mode)
    save_checkpoint(paths["checkpoint"], trained.model, agents, cfg.model.seed)
    write_json(paths["loss"], [e.model_dump() for e in trained.trace])
    return {
        "mode": cfg.run.mode.value,
        "epochs": len(trained.trace),
        "final_loss": trained.trace[-1].loss,
        "checkpoint": str(paths["checkpoint"]),
    }


def cmd_score(args: argparse.Namespace, cfg: RunConfig, ws: Workspace) -> Summary:
    paths = artifact_paths(ws.out, cfg.run.mode)
    model, header = load_checkpoint(args.checkpoint or paths["checkpoint"])
    dataset = ws.load_dataset()
    poi = ws.poi_context()
    builder = ablation_context(
        header.mode,
        header.agent_table,
        contextual=poi.contextual if poi else None,
        categories=poi.categories if poi else None,
        poi_dim=header.poi_dim,
    )
    out = artifact_paths(ws.out, header.mode)["scores"]
    records = score_sequences(
        model, dataset.split("test"), builder, cfg.model.mc_samples, header.seed, cfg.run.threads
    )
    write_scores(out, records)
    return {
        "mode": header.mode.value,
        "n_scored": len(records),
        "score_stats": statistics([r.score for r in records]).model_dump(),
        "scores": str(out),
    }


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig, ws: Workspace) -> Summary:
    paths = artifact_paths(ws.out, cfg.run.mode)
    agents = agent_level(read_scores(args.scores or paths["scores"]))
    curve = pr_curve(agents, read_labels(args.labels or ws.labels))
    write_agent_scores(paths["agent_scores"], agents)
    write_curve(paths["pr"], curve)
    return {
        "mode": cfg.run.mode.value,
        "average_precision": curve.average_precision,
        "n_agents": curve.n_agents,
        "n_positive": curve.n_positive,
    }


def cmd_ablation(args: argparse.Namespace, cfg: RunConfig, ws: Workspace) -> Summary:
    """Run every context mode, producing upstream artifacts that are still missing."""
    if not ws.dataset.exists():
        if not ws.trajectories.exists():
            logger.info("No trajectories in %s, simulating", ws.out)
            cmd_simulate(args, cfg, ws)
        cmd_preprocess(args, cfg, ws)
    if not ws.clusters.exists():
        cmd_embed_poi(args, cfg, ws)
    poi = ws.poi_context()
    if poi is None:
        raise ConfigError(f"no POI clusters in {ws.out}; run embed-poi first")
    result = run_ablation(
        ws.load_dataset(),
        poi,
        read_labels(args.labels or ws.labels),
        cfg.model,
        cfg.run.threads,
        ws.out,
    )
    best = result.report.best
    return {
        "average_precision": {r.mode.value: r.average_precision for r in result.report.rows},
        "best": best.value if best else None,
        "failed": sorted(r.mode.value for r in result.report.rows if r.error),
        "report": str(ws.out / "ablation.csv"),
    }


def cmd_config(args: argparse.Namespace, cfg: RunConfig, ws: Workspace) -> Summary:
    return {"config": cfg.model_dump(mode="json")}


Command = Callable[[argparse.Namespace, RunConfig, Workspace], Summary]

COMMANDS: dict[str, tuple[Command, str]] = {
    "simulate": (cmd_simulate, "Generate a synthetic city, agents, anomalies and GPS traces"),
    "preprocess": (cmd_preprocess, "Stay points, subtrajectories and grid tokens"),
    "embed-poi": (cmd_embed_poi, "POI embeddings, contextual clusters and grid count vectors"),
    "train": (cmd_train, "Train the conditional VAE for --mode"),
    "score": (cmd_score, "Score the test split with a checkpoint"),
    "evaluate": (cmd_evaluate, "Agent-level scores and the precision-recall curve"),
    "ablation": (cmd_ablation, "Train and evaluate all five context modes"),
    "config": (cmd_config, "Print the merged configuration"),
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def _bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _flag_type(annotation: Any) -> Callable[[str], Any]:
    if annotation is bool:
        return _bool
    if annotation in (int, float, str):
        return annotation
    return json.loads  # nested values (grid, categories, weights) as JSON


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file overriding the packaged defaults")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Seed for every stage")
    common.add_argument(
        "--mode",
        default=argparse.SUPPRESS,
        metavar="{" + "|".join(m.slug for m in ContextMode) + "}",
        help="Context mode for train/score/evaluate",
    )
    common.add_argument(
        "--threads", type=int, default=argparse.SUPPRESS, help="Scoring threads; other stages run on one"
    )
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="Artifact directory")

    group = common.add_argument_group("configuration keys")
    for section in CONFIG_SECTIONS:
        section_model: type[BaseModel] = RunConfig.model_fields[section].annotation  # pyright: ignore
        for key, field in section_model.model_fields.items():
            group.add_argument(
                f"--{section}-{key.replace('_', '-')}",
                dest=f"{section}.{key}",
                type=_flag_type(field.annotation),
                default=argparse.SUPPRESS,
                metavar=key.upper(),
            )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="trajscope", description="Context-aware trajectory anomaly detection"
    )
    subparsers = parser.add_subparsers(dest="command", required=True, help="Command to run")
    subs = {
        name: subparsers.add_parser(name, parents=[common], help=text) for name, (_, text) in COMMANDS.items()
    }

    subs["preprocess"].add_argument(
        "--input", type=Path, help="Trajectory JSONL (default: OUT/trajectories.jsonl)"
    )
    subs["preprocess"].add_argument(
        "--fit-grid", action="store_true", help="Anchor the grid on the data instead of OUT/sim_meta.json"
    )
    subs["embed-poi"].add_argument("--pois", type=Path, help="POI CSV (default: OUT/pois.csv)")
    subs["score"].add_argument(
        "--checkpoint", type=Path, help="Checkpoint (default: OUT/checkpoint_<mode>.bin)"
    )
    subs["evaluate"].add_argument("--scores", type=Path, help="Score CSV (default: OUT/scores_<mode>.csv)")
    for name in ("evaluate", "ablation"):
        subs[name].add_argument("--labels", type=Path, help="Labels CSV (default: OUT/labels.csv)")
    # ablation may run preprocess and embed-poi itself
    subs["ablation"].add_argument("--input", type=Path, help=argparse.SUPPRESS)
    subs["ablation"].add_argument("--fit-grid", action="store_true", help=argparse.SUPPRESS)
    subs["ablation"].add_argument("--pois", type=Path, help=argparse.SUPPRESS)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    values = vars(args)
    overrides = {k: v for k, v in values.items() if "." in k}
    for key in ("seed",):
        if key in values:
            overrides[key] = values[key]
    for key in ("mode", "threads", "out"):
        if key in values:
            overrides[f"run.{key}"] = values[key]
    return overrides


def main(argv: Sequence[str] | None = None) -> int:
    """Main CLI entrypoint."""
    args = build_parser().parse_args(argv)
    summary: Summary = {"command": args.command}
    try:
        cfg = load_config(args.config, _overrides(args))
        set_config(cfg)
        torch.set_num_threads(1)
        command, _ = COMMANDS[args.command]
        summary |= command(args, cfg, Workspace(cfg.run.out))
        summary["ok"] = True
        code = 0
    except (ValidationError, ValueError, FileNotFoundError) as e:
        logger.error("%s", e)
        summary |= {"ok": False, "error": str(e)}
        code = 1
    except Exception as e:
        logger.error("%s: %s", type(e).__name__, e)
        summary |= {"ok": False, "error": f"{type(e).__name__}: {e}"}
        code = 2
    sys.stdout.write(json.dumps(summary, sort_keys=True, default=str) + "\n")
    sys.stdout.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
