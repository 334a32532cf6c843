"""Agent-level inference and precision-recall evaluation."""

from src.scoring.core import (
    MODE_TITLES,
    ablation_report,
    agent_level,
    pr_curve,
    read_curve,
    read_labels,
    report_frame,
    report_markdown,
    write_agent_scores,
    write_curve,
    write_labels,
    write_report,
)
from src.scoring.models import AblationReport, AblationRow, AgentScore, PrCurve

__all__ = [
    "MODE_TITLES",
    "ablation_report",
    "agent_level",
    "pr_curve",
    "read_curve",
    "read_labels",
    "report_frame",
    "report_markdown",
    "write_agent_scores",
    "write_curve",
    "write_labels",
    "write_report",
    "AblationReport",
    "AblationRow",
    "AgentScore",
    "PrCurve",
]
