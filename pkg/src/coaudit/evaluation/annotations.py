"""Human review of generated audit reports.

Each reviewed CCL gets two grades per annotator:

* correctness: 1 (not correct), 2 (partially correct), 3 (perfect)
* relevance: 1 (not relevant), 2 (partially relevant), 3 (totally relevant)
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

# Pandas for table management
import pandas as pd

from coaudit.evaluation.statistics import cohens_kappa

logger = logging.getLogger(__name__)

ANNOTATION_COLUMNS = ["ccl_id", "annotator", "correctness", "relevance"]
SHARE_COLUMNS = [
    "correctness_perfect",
    "correctness_partial",
    "relevance_total",
    "relevance_partial",
]
AVERAGE_LABEL = "Average"


@dataclass(frozen=True)
class AnnotationRecord:
    """Grades one annotator gave to the report of one CCL."""

    ccl_id: str
    annotator: str
    correctness: int
    relevance: int

    def __post_init__(self) -> None:
        """Check that both grades are on the 1-3 scale."""
        for name in ("correctness", "relevance"):
            level = getattr(self, name)
            if level not in (1, 2, 3):
                raise ValueError(
                    f"The {name} grade of {self.ccl_id} by {self.annotator} must be 1, 2 or 3, got {level}."
                )


def annotations_frame(records: Sequence[AnnotationRecord]) -> pd.DataFrame:
    """Tabulate annotation records."""
    return pd.DataFrame(
        [[r.ccl_id, r.annotator, r.correctness, r.relevance] for r in records],
        columns=ANNOTATION_COLUMNS,
    )


def read_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Read annotation records from a CSV with the annotation columns.

    Raises:
        ValueError: If a column is missing or a grade is out of range.
    """
    frame = pd.read_csv(path, dtype={"ccl_id": str, "annotator": str})
    missing = [column for column in ANNOTATION_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"Columns {', '.join(missing)} are not present in {path}!")
    return [
        AnnotationRecord(row.ccl_id, row.annotator, int(row.correctness), int(row.relevance))
        for row in frame.itertuples(index=False)
    ]


def summarize_annotations(records: Sequence[AnnotationRecord]) -> pd.DataFrame:
    """Compute the share of reports reaching each grade threshold.

    Args:
        records: Annotation records of one or more annotators.

    Returns:
        One row per annotator and a final 'Average' row (the mean of the
        annotator rows), with percentages for perfect correctness, at least
        partial correctness, total relevance and at least partial relevance.

    Raises:
        ValueError: If no records are given.
    """
    if not records:
        raise ValueError("Cannot summarize an empty set of annotations.")
    frame = annotations_frame(records)

    # Indicator per threshold, averaged within each annotator
    indicators = pd.DataFrame(
        {
            "annotator": frame["annotator"],
            "correctness_perfect": frame["correctness"].eq(3),
            "correctness_partial": frame["correctness"].ge(2),
            "relevance_total": frame["relevance"].eq(3),
            "relevance_partial": frame["relevance"].ge(2),
        }
    )
    per_annotator = (
        indicators.groupby("annotator", sort=False)[SHARE_COLUMNS].mean().multiply(100).reset_index()
    )

    average = per_annotator[SHARE_COLUMNS].mean().to_frame().T
    average.insert(0, "annotator", AVERAGE_LABEL)

    summary = pd.concat([per_annotator, average], ignore_index=True)
    summary[SHARE_COLUMNS] = summary[SHARE_COLUMNS].astype(float).round(2)
    logger.info(
        "Summarized %s annotation(s) from %s annotator(s)", len(frame), len(per_annotator)
    )
    return summary


def annotation_agreement(records: Sequence[AnnotationRecord]) -> dict[str, float | None]:
    """Cohen's Kappa per grade between the first two annotators.

    Only CCLs graded by both annotators are compared.

    Returns:
        Kappa for 'correctness' and 'relevance', None where it is undefined.
        Empty when fewer than two annotators took part.
    """
    frame = annotations_frame(records)
    annotators = list(dict.fromkeys(frame["annotator"]))
    if len(annotators) < 2:
        return {}
    first = frame[frame["annotator"] == annotators[0]].drop_duplicates("ccl_id", keep="last")
    second = frame[frame["annotator"] == annotators[1]].drop_duplicates("ccl_id", keep="last")
    paired = first.merge(second, on="ccl_id", suffixes=("_a", "_b"))
    agreement: dict[str, float | None] = {}
    for grade in ("correctness", "relevance"):
        try:
            agreement[grade] = cohens_kappa(
                paired[f"{grade}_a"].tolist(), paired[f"{grade}_b"].tolist()
            )
        except ValueError as err:
            logger.warning("No %s agreement between %s and %s: %s", grade, *annotators[:2], err)
            agreement[grade] = None
    return agreement
