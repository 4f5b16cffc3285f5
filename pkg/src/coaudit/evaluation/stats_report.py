"""Detection tables and statistics blocks comparing audit runs."""

import logging
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import asdict
from dataclasses import dataclass
from typing import Any

# Pandas for table management
import pandas as pd

from coaudit.errors import CoAuditError
from coaudit.errors import LengthMismatchError
from coaudit.evaluation.formats import format_decimal
from coaudit.evaluation.formats import format_integer
from coaudit.evaluation.formats import format_percent
from coaudit.evaluation.matching import MatchResult
from coaudit.evaluation.statistics import EffectSize
from coaudit.evaluation.statistics import McNemarResult
from coaudit.evaluation.statistics import PairedOutcome
from coaudit.evaluation.statistics import PrecisionRecall
from coaudit.evaluation.statistics import cohens_d
from coaudit.evaluation.statistics import detection_rate
from coaudit.evaluation.statistics import mcnemar
from coaudit.evaluation.statistics import precision_recall_f1
from coaudit.evaluation.statistics import reconstruct_outcomes

logger = logging.getLogger(__name__)

GROUND_TRUTH_LABEL = "Ground truth"
TOTAL_LABEL = "Total"


@dataclass(frozen=True)
class ComparisonStats:
    """Statistics of one pair of runs.

    Attributes:
        label_a: Label of the first run.
        label_b: Label of the second run.
        rate_a: Detection rate of the first run, in percent.
        rate_b: Detection rate of the second run, in percent.
        mcnemar: McNemar's test, None when it is undefined.
        effect: Cohen's d over the category counts, None when undefined.
        notes: Why a statistic is missing.
    """

    label_a: str
    label_b: str
    rate_a: float
    rate_b: float
    mcnemar: McNemarResult | None
    effect: EffectSize | None
    notes: tuple[str, ...] = ()


def detection_table(
    runs: Mapping[str, Mapping[str, int]], ground_truth: Mapping[str, int]
) -> pd.DataFrame:
    """Tabulate correct detections per category for several runs.

    Args:
        runs: Per-category counts keyed by run label, in column order.
        ground_truth: Labeled vulnerabilities per category, in row order.

    Returns:
        One row per category and a 'Total' row; one column per run and a
        'Ground truth' column.
    """
    categories = list(ground_truth)
    table = pd.DataFrame(
        {label: [int(counts.get(c, 0)) for c in categories] for label, counts in runs.items()},
        index=pd.Index(categories, name="Category"),
    )
    table[GROUND_TRUTH_LABEL] = [int(ground_truth[c]) for c in categories]
    table.loc[TOTAL_LABEL] = table.sum()
    return table


def _compare(
    label_a: str,
    label_b: str,
    counts_a: Mapping[str, int],
    counts_b: Mapping[str, int],
    ground_truth: Mapping[str, int],
    outcomes: Sequence[PairedOutcome],
) -> ComparisonStats:
    total = sum(ground_truth.values())
    notes = []
    test = None
    effect = None
    try:
        test = mcnemar(outcomes)
    except CoAuditError as err:
        notes.append(f"McNemar: {err}")
    try:
        effect = cohens_d(
            [counts_a.get(c, 0) for c in ground_truth], [counts_b.get(c, 0) for c in ground_truth]
        )
    except CoAuditError as err:
        notes.append(f"Cohen's d: {err}")
    return ComparisonStats(
        label_a=label_a,
        label_b=label_b,
        rate_a=detection_rate(sum(counts_a.values()), total),
        rate_b=detection_rate(sum(counts_b.values()), total),
        mcnemar=test,
        effect=effect,
        notes=tuple(notes),
    )


def compare_counts(
    label_a: str,
    counts_a: Mapping[str, int],
    label_b: str,
    counts_b: Mapping[str, int],
    ground_truth: Mapping[str, int],
) -> ComparisonStats:
    """Compare two runs known only by their per-category counts.

    The paired outcomes are reconstructed assuming nested detection.

    Raises:
        ZeroTotalError: If the ground truth is empty.
    """
    outcomes = reconstruct_outcomes(counts_a, counts_b, ground_truth)
    return _compare(label_a, label_b, counts_a, counts_b, ground_truth, outcomes)


def compare_results(
    label_a: str,
    result_a: MatchResult,
    label_b: str,
    result_b: MatchResult,
    ground_truth: Mapping[str, int],
) -> ComparisonStats:
    """Compare two runs over the same labeled entries.

    Raises:
        LengthMismatchError: If the runs were matched against different ground truths.
        ZeroTotalError: If the ground truth is empty.
    """
    if [e.function_id for e in result_a.entries] != [e.function_id for e in result_b.entries]:
        raise LengthMismatchError(f"Runs {label_a} and {label_b} cover different ground-truth entries")
    outcomes = [
        PairedOutcome(entry=entry, detected_by_a=a, detected_by_b=b)
        for entry, a, b in zip(result_a.entries, result_a.detected, result_b.detected, strict=True)
    ]
    return _compare(label_a, label_b, result_a.counts, result_b.counts, ground_truth, outcomes)


def run_scores(result: MatchResult) -> PrecisionRecall | None:
    """Precision, recall and F1 of a run, None when they are undefined."""
    try:
        return precision_recall_f1(
            tp=result.total,
            fp=result.false_positives,
            fn=len(result.entries) - result.total,
        )
    except CoAuditError as err:
        logger.warning("No precision and recall: %s", err)
        return None


def _markdown_table(table: pd.DataFrame) -> list[str]:
    formatted = table.apply(format_integer)
    totals = table.loc[TOTAL_LABEL].astype(float)
    rates = format_percent(totals / totals[GROUND_TRUTH_LABEL])
    header = [table.index.name or "Category", *table.columns]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] + ["---:"] * len(table.columns)) + "|",
    ]
    for category, row in formatted.iterrows():
        lines.append("| " + " | ".join([str(category), *row.tolist()]) + " |")
    lines.append("| Detection rate (%) | " + " | ".join(rates.tolist()) + " |")
    return lines


def _comparison_lines(stats: ComparisonStats) -> list[str]:
    lines = [
        f"## {stats.label_a} vs {stats.label_b}",
        "",
        f"- Detection rate: {format_decimal(stats.rate_a)}% vs {format_decimal(stats.rate_b)}%",
    ]
    if stats.mcnemar is not None:
        test = stats.mcnemar
        lines.append(
            f"- McNemar: b={test.b}, c={test.c}, statistic={format_decimal(test.statistic)}, "
            f"p={test.p_value:.3g}, critical value={test.critical_value}, "
            f"significant={'yes' if test.significant else 'no'}"
        )
    if stats.effect is not None:
        effect = stats.effect
        lines.append(
            f"- Cohen's d: {format_decimal(effect.cohens_d)} "
            f"(mean {format_decimal(effect.mean_a)} vs {format_decimal(effect.mean_b)}, "
            f"sd {format_decimal(effect.sd_a)} vs {format_decimal(effect.sd_b)})"
        )
    lines.extend(f"- {note}" for note in stats.notes)
    return lines


def render_stats_report(
    table: pd.DataFrame,
    comparisons: Sequence[ComparisonStats],
    scores: Mapping[str, PrecisionRecall | None] | None = None,
    title: str = "Detection results",
) -> str:
    """Render the detection table and statistics blocks as markdown.

    Args:
        table: Output of :func:`detection_table`.
        comparisons: One block per pair of runs.
        scores: Precision, recall and F1 per run label.
        title: Heading of the document.

    Returns:
        The markdown document.
    """
    lines = [f"# {title}", "", *_markdown_table(table), ""]
    if scores:
        lines += ["| Run | Precision (%) | Recall (%) | F1 (%) |", "|---|---:|---:|---:|"]
        for label, score in scores.items():
            values = [score.precision, score.recall, score.f1] if score else [None] * 3
            lines.append(f"| {label} | " + " | ".join(format_decimal(v) for v in values) + " |")
        lines.append("")
    for stats in comparisons:
        lines += [*_comparison_lines(stats), ""]
    return "\n".join(lines)


def stats_document(
    table: pd.DataFrame,
    comparisons: Sequence[ComparisonStats],
    scores: Mapping[str, PrecisionRecall | None] | None = None,
) -> dict[str, Any]:
    """The same numbers as :func:`render_stats_report`, as plain data."""
    return {
        "table": {
            column: {str(category): int(value) for category, value in table[column].items()}
            for column in table.columns
        },
        "scores": {label: asdict(score) if score else None for label, score in (scores or {}).items()},
        "comparisons": [asdict(stats) for stats in comparisons],
    }
