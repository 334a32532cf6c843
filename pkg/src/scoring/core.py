"""Agent-level aggregation, precision-recall evaluation and ablation reporting."""

from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from src.common.errors import DegenerateLabels, EmptyInput, RecordParseError
from src.common.models import ContextMode
from src.common.utils.io import atomic_open, read_csv, read_json, write_csv, write_json
from src.common.utils.logger import logger
from src.cvae.models import ScoreRecord
from src.scoring.models import AblationReport, AblationRow, AgentScore, Flag, PrCurve

AGENT_COLUMNS = ["agent_id", "score", "argmax_subtraj_id", "n_subtrajs"]
LABEL_COLUMNS = ["agent_id", "label"]
ABLATION_COLUMNS = ["mode", "average_precision", "flag"]

MODE_TITLES = {
    ContextMode.NONE: "No context",
    ContextMode.POI_CATEGORIES: "POI Categories",
    ContextMode.POI_CONTEXTUAL: "POI Contextual Embedding",
    ContextMode.AGENT_ID: "Agent ID",
    ContextMode.COMBINED: "POI Contextual Embedding + Agent ID",
}


def agent_level(scores: Sequence[ScoreRecord]) -> list[AgentScore]:
    """Maximum score per agent, sorted by agent_id.

    Equal maxima resolve to the smallest subtraj_id so the result does not depend on record order.

    Raises:
        EmptyInput: if there are no records.
    """
    if not scores:
        raise EmptyInput("no score records to aggregate")
    best: dict[str, ScoreRecord] = {}
    counts: dict[str, int] = {}
    for rec in scores:
        counts[rec.agent_id] = counts.get(rec.agent_id, 0) + 1
        cur = best.get(rec.agent_id)
        if cur is None or (rec.score, -rec.subtraj_id) > (cur.score, -cur.subtraj_id):
            best[rec.agent_id] = rec
    return [
        AgentScore(
            agent_id=agent,
            score=rec.score,
            argmax_subtraj_id=rec.subtraj_id,
            n_subtrajs=counts[agent],
        )
        for agent, rec in sorted(best.items())
    ]


def pr_curve(agent_scores: Sequence[AgentScore], labels: Mapping[str, int]) -> PrCurve:
    """Precision-recall sweep over agent scores with step-interpolated average precision.

    Agents with equal scores enter at the same threshold. Agents missing from `labels` count as
    normal. Positive agents in `labels` without a score are never flagged: they count towards the
    positives, so recall stays below 1, and towards `n_agents`.

    Raises:
        DegenerateLabels: if there is no positive agent or no scored negative one.
    """
    missing = [a.agent_id for a in agent_scores if a.agent_id not in labels]
    if missing:
        logger.info("%d scored agents have no label and count as normal", len(missing))
    scored = {a.agent_id for a in agent_scores}
    n_unscored = sum(1 for agent, y in labels.items() if y == 1 and agent not in scored)
    if n_unscored:
        logger.warning("%d positive agents have no scores and count as missed", n_unscored)
    scores = np.array([a.score for a in agent_scores], dtype=np.float64)
    target = np.array([labels.get(a.agent_id, 0) for a in agent_scores], dtype=np.int64)
    n_pos = int(target.sum()) + n_unscored
    if n_pos == 0 or int(target.sum()) == len(target):
        raise DegenerateLabels(f"need both classes, got {n_pos} positives out of {len(target)} scored agents")

    order = np.argsort(-scores, kind="stable")
    scores, target = scores[order], target[order]
    # last index of each run of equal scores
    last = np.flatnonzero(np.append(scores[1:] != scores[:-1], True))
    tp = np.cumsum(target)[last]
    predicted = last + 1

    points: list[tuple[float, float]] = []
    # sum of (recall step) * precision, with the 1 / n_pos factored out
    weighted, prev_hits = 0.0, 0
    for hits, k in zip(tp.tolist(), predicted.tolist(), strict=True):
        precision = hits / k
        weighted += (hits - prev_hits) * precision
        prev_hits = hits
        points.append((hits / n_pos, precision))
    ap = min(1.0, weighted / n_pos)
    return PrCurve(points=points, average_precision=ap, n_positive=n_pos, n_agents=len(target) + n_unscored)


def _flags(values: Sequence[float | None]) -> list[Flag]:
    ranked = sorted({v for v in values if v is not None}, reverse=True)
    flags: list[Flag] = []
    for v in values:
        if v is not None and v == ranked[0]:
            flags.append("best")
        elif v is not None and len(ranked) > 1 and v == ranked[1]:
            flags.append("second")
        else:
            flags.append("")
    return flags


def ablation_report(
    runs: Mapping[ContextMode, PrCurve | None],
    errors: Mapping[ContextMode, str] | None = None,
) -> AblationReport:
    """Average precision per context mode in canonical mode order, best and second best flagged.

    A mode mapped to None failed; its error message comes from `errors`.
    """
    errors = errors or {}
    modes = [m for m in ContextMode if m in runs]
    curves = [runs[m] for m in modes]
    aps = [None if c is None else c.average_precision for c in curves]
    return AblationReport(
        rows=[
            AblationRow(mode=m, average_precision=ap, flag=flag, error=errors.get(m))
            for m, ap, flag in zip(modes, aps, _flags(aps), strict=True)
        ]
    )


def report_frame(report: AblationReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"mode": r.mode.value, "average_precision": r.average_precision, "flag": r.flag}
            for r in report.rows
        ],
        columns=ABLATION_COLUMNS,
    )


def report_markdown(report: AblationReport) -> str:
    """One-row table, one column per mode; best in bold, second best underlined."""
    header = [MODE_TITLES[r.mode] for r in report.rows]
    cells: list[str] = []
    for r in report.rows:
        if r.average_precision is None:
            cells.append("failed")
            continue
        text = f"{r.average_precision:.4f}"
        if r.flag == "best":
            text = f"**{text}**"
        elif r.flag == "second":
            text = f"<u>{text}</u>"
        cells.append(text)
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join(["---"] * len(header)) + " |",
        "| " + " | ".join(cells) + " |",
    ]
    return "\n".join(lines) + "\n"


def write_report(csv_path: str | Path, md_path: str | Path, report: AblationReport) -> None:
    write_csv(csv_path, report_frame(report))
    with atomic_open(md_path) as f:
        f.write(report_markdown(report))


def read_labels(path: str | Path) -> dict[str, int]:
    frame = read_csv(path, LABEL_COLUMNS, dtype={"agent_id": str})
    labels: dict[str, int] = {}
    for lineno, (agent, label) in enumerate(zip(frame["agent_id"], frame["label"], strict=True), start=2):
        if label not in (0, 1):
            raise RecordParseError(str(path), lineno, f"label must be 0 or 1, got {label!r}")
        labels[str(agent)] = int(label)
    return labels


def write_labels(path: str | Path, labels: Mapping[str, int]) -> None:
    frame = pd.DataFrame(sorted(labels.items()), columns=LABEL_COLUMNS)
    write_csv(path, frame)


def write_agent_scores(path: str | Path, agent_scores: Sequence[AgentScore]) -> None:
    write_csv(path, pd.DataFrame([a.model_dump() for a in agent_scores], columns=AGENT_COLUMNS))


def write_curve(path: str | Path, curve: PrCurve) -> None:
    write_json(path, curve.model_dump(mode="json"))


def read_curve(path: str | Path) -> PrCurve:
    return PrCurve.model_validate(read_json(path))
