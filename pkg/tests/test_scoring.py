from pathlib import Path

import numpy as np
import pytest
from sklearn.metrics import average_precision_score

from src.common.errors import DegenerateLabels, EmptyInput, RecordParseError
from src.common.models import ContextMode
from src.cvae import ScoreRecord
from src.scoring import (
    AgentScore,
    PrCurve,
    ablation_report,
    agent_level,
    pr_curve,
    read_curve,
    read_labels,
    report_frame,
    report_markdown,
    write_curve,
    write_labels,
    write_report,
)


def _agents(scores: list[float]) -> list[AgentScore]:
    return [
        AgentScore(agent_id=f"a{i:03d}", score=s, argmax_subtraj_id=i, n_subtrajs=1)
        for i, s in enumerate(scores)
    ]


def _labels(labels: list[int]) -> dict[str, int]:
    return {f"a{i:03d}": y for i, y in enumerate(labels)}


def threshold_sweep(
    scores: list[float], labels: list[int], n_missed: int = 0
) -> tuple[list[tuple[float, float]], float]:
    """Every distinct score as a threshold, predicting positive at or above it.

    `n_missed` positives have no score and are never predicted.
    """
    n_pos = sum(labels) + n_missed
    points: list[tuple[float, float]] = []
    weighted, prev_hits = 0.0, 0
    for tau in sorted(set(scores), reverse=True):
        predicted = [y for s, y in zip(scores, labels, strict=True) if s >= tau]
        hits = sum(predicted)
        precision = hits / len(predicted)
        points.append((hits / n_pos, precision))
        weighted += (hits - prev_hits) * precision
        prev_hits = hits
    return points, min(1.0, weighted / n_pos)


def _random_case(rng: np.random.Generator) -> tuple[list[float], list[int]]:
    n = int(rng.integers(2, 101))
    if rng.random() < 0.5:
        scores = rng.integers(0, 6, n).astype(float).tolist()  # heavy ties
    else:
        scores = rng.normal(size=n).tolist()
    labels = rng.integers(0, 2, n).tolist()
    labels[0], labels[1] = 0, 1
    return scores, labels


def test_pr_curve_matches_threshold_sweep():
    rng = np.random.default_rng(0)
    for _ in range(1_000):
        scores, labels = _random_case(rng)
        curve = pr_curve(_agents(scores), _labels(labels))
        points, ap = threshold_sweep(scores, labels)
        assert curve.points == points
        assert curve.average_precision == ap
        assert 0.0 <= curve.average_precision <= 1.0


def test_average_precision_agrees_with_sklearn():
    rng = np.random.default_rng(1)
    for _ in range(200):
        scores, labels = _random_case(rng)
        curve = pr_curve(_agents(scores), _labels(labels))
        assert curve.average_precision == pytest.approx(average_precision_score(labels, scores), abs=1e-12)


def test_perfect_separation():
    rng = np.random.default_rng(2)
    for n_pos in range(1, 20):
        scores = [*rng.uniform(5, 6, n_pos), *rng.uniform(0, 1, 30)]
        curve = pr_curve(_agents(list(scores)), _labels([1] * n_pos + [0] * 30))
        assert curve.average_precision == 1.0


def test_constant_scores_give_positive_rate():
    curve = pr_curve(_agents([0.5] * 8), _labels([1, 0, 0, 1, 0, 0, 0, 1]))
    assert curve.points == [(1.0, 3 / 8)]
    assert curve.average_precision == pytest.approx(3 / 8)


def test_five_agent_hand_case():
    # ranking: 0.9(+) 0.8(-) 0.7(+) 0.7(-) 0.1(+)
    curve = pr_curve(_agents([0.9, 0.8, 0.7, 0.7, 0.1]), _labels([1, 0, 1, 0, 1]))
    assert curve.points == [(1 / 3, 1.0), (1 / 3, 0.5), (2 / 3, 0.5), (1.0, 0.6)]
    assert curve.average_precision == pytest.approx((1.0 + 0.5 + 0.6) / 3)


def test_degenerate_labels():
    with pytest.raises(DegenerateLabels):
        pr_curve(_agents([0.1, 0.2]), _labels([0, 0]))
    with pytest.raises(DegenerateLabels):
        pr_curve(_agents([0.1, 0.2]), _labels([1, 1]))


def test_unlabeled_agents_count_as_normal():
    curve = pr_curve(_agents([0.9, 0.5, 0.1]), {"a002": 1})
    assert curve.n_positive == 1 and curve.n_agents == 3
    assert curve.average_precision == pytest.approx(1 / 3)


def test_unscored_positives_count_as_missed():
    labels = {"a000": 1, "a001": 0, "a002": 0, "ghost": 1, "idle": 0}
    curve = pr_curve(_agents([0.9, 0.5, 0.1]), labels)
    assert curve.n_positive == 2 and curve.n_agents == 4
    assert curve.points == [(0.5, 1.0), (0.5, 0.5), (0.5, 1 / 3)]
    assert curve.average_precision == pytest.approx(0.5)

    rng = np.random.default_rng(3)
    for _ in range(300):
        scores, truth = _random_case(rng)
        n_missed = int(rng.integers(1, 5))
        ghosts = {f"ghost{k}": 1 for k in range(n_missed)}
        curve = pr_curve(_agents(scores), _labels(truth) | ghosts)
        points, ap = threshold_sweep(scores, truth, n_missed)
        assert curve.points == points
        assert curve.average_precision == ap
        assert curve.points[-1][0] < 1.0


def test_only_unscored_positives_give_zero_precision():
    curve = pr_curve(_agents([0.3, 0.2]), {"a000": 0, "a001": 0, "ghost": 1})
    assert curve.average_precision == 0.0
    assert all(recall == 0.0 for recall, _ in curve.points)


def _records(rng: np.random.Generator) -> list[ScoreRecord]:
    n = int(rng.integers(1, 60))
    agents = [f"agent_{k}" for k in range(int(rng.integers(1, 8)))]
    ids = rng.permutation(1_000)[:n]
    return [
        ScoreRecord.from_loglik(int(i), agents[int(rng.integers(len(agents)))], -float(rng.integers(0, 5)))
        for i in ids
    ]


def test_agent_level_is_group_maximum():
    rng = np.random.default_rng(3)
    for _ in range(1_000):
        records = _records(rng)
        groups: dict[str, list[ScoreRecord]] = {}
        for r in records:
            groups.setdefault(r.agent_id, []).append(r)
        want = []
        for agent in sorted(groups):
            top = max(r.score for r in groups[agent])
            first = min(r.subtraj_id for r in groups[agent] if r.score == top)
            want.append(
                AgentScore(agent_id=agent, score=top, argmax_subtraj_id=first, n_subtrajs=len(groups[agent]))
            )
        assert agent_level(records) == want
        assert agent_level(list(reversed(records))) == want


def test_agent_level_needs_records():
    with pytest.raises(EmptyInput):
        agent_level([])


def _curve(ap: float) -> PrCurve:
    return PrCurve(points=[(1.0, ap)], average_precision=ap, n_positive=1, n_agents=2)


def test_ablation_report_flags_and_order():
    runs = {
        ContextMode.COMBINED: _curve(0.8),
        ContextMode.NONE: _curve(0.3),
        ContextMode.AGENT_ID: _curve(0.6),
        ContextMode.POI_CONTEXTUAL: _curve(0.5),
        ContextMode.POI_CATEGORIES: None,
    }
    report = ablation_report(runs, {ContextMode.POI_CATEGORIES: "boom"})
    assert [r.mode for r in report.rows] == list(ContextMode)
    assert [r.flag for r in report.rows] == ["", "", "", "second", "best"]
    assert report.best is ContextMode.COMBINED
    assert report.ap(ContextMode.NONE) == 0.3
    assert report.rows[1].error == "boom"

    md = report_markdown(report).splitlines()
    assert md[0].split(" | ")[0] == "| No context"
    assert md[0].endswith("| Agent ID | POI Contextual Embedding + Agent ID |")
    assert md[2] == "| 0.3000 | failed | 0.5000 | <u>0.6000</u> | **0.8000** |"
    assert report_frame(report)["mode"].tolist() == [m.value for m in ContextMode]


def test_ablation_ties_share_the_flag():
    report = ablation_report({ContextMode.NONE: _curve(0.5), ContextMode.AGENT_ID: _curve(0.5)})
    assert [r.flag for r in report.rows] == ["best", "best"]


def test_report_and_label_files(tmp_path: Path):
    report = ablation_report({ContextMode.NONE: _curve(0.25), ContextMode.COMBINED: _curve(0.75)})
    write_report(tmp_path / "ablation.csv", tmp_path / "ablation.md", report)
    assert (tmp_path / "ablation.csv").read_text().splitlines() == [
        "mode,average_precision,flag",
        "none,0.25,second",
        "combined,0.75,best",
    ]
    assert "**0.7500**" in (tmp_path / "ablation.md").read_text()

    write_labels(tmp_path / "labels.csv", {"b": 1, "a": 0})
    assert read_labels(tmp_path / "labels.csv") == {"a": 0, "b": 1}
    (tmp_path / "bad.csv").write_text("agent_id,label\na,2\n")
    with pytest.raises(RecordParseError):
        read_labels(tmp_path / "bad.csv")

    curve = pr_curve(_agents([0.9, 0.1, 0.4]), _labels([1, 0, 0]))
    write_curve(tmp_path / "pr.json", curve)
    assert read_curve(tmp_path / "pr.json") == curve
