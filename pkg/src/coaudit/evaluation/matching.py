"""Match audit findings against labeled vulnerabilities."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

# Numpy for data wrangling
import numpy as np

# Pandas for table management
import pandas as pd

from coaudit.auditing.responses import AuditFinding
from coaudit.auditing.responses import Judgment
from coaudit.auditing.taxonomy import Taxonomy
from coaudit.evaluation.groundtruth import GroundTruthEntry

logger = logging.getLogger(__name__)

MATCH_KEYS = ["functionId", "category"]
OUTCOME_COLUMNS = ["contract", "functionId", "category", "labeled", "detected"]


def indicate_merge(
    left: pd.DataFrame,
    right: pd.DataFrame,
    how: Literal["left", "right", "outer", "inner"],
    on: list[str],
) -> pd.DataFrame:
    """Merge two tables and log how many rows of each merge type it produced.

    The merge types are determined as follows (left-to-right):
        - 'one-to-zero' / 'zero-to-one': the key exists once, on one side only.
        - 'many-to-zero' / 'zero-to-many': the key is repeated, on one side only.
        - 'one-to-one': the key exists once on both sides.
        - 'many-to-one' / 'one-to-many': the key is repeated on one side.
        - 'many-to-many': the key is repeated on both sides.

    Args:
        left: The left table.
        right: The right table.
        how: The type of merge to be performed.
        on: Key columns.

    Returns:
        The merged table.
    """
    merged = pd.merge(left, right, how=how, on=on, indicator=True)
    if merged.empty:
        logger.info("Sum of entries after merge: 0")
        return merged.drop(columns="_merge")

    indicator = merged["_merge"].to_numpy()
    keys = pd.MultiIndex.from_frame(merged[on])
    repeated_left = pd.MultiIndex.from_frame(left.loc[left.duplicated(subset=on, keep=False), on])
    repeated_right = pd.MultiIndex.from_frame(right.loc[right.duplicated(subset=on, keep=False), on])
    from_left = keys.isin(repeated_left)
    from_right = keys.isin(repeated_right)

    conditions = [
        (indicator == "left_only") & ~from_left,
        (indicator == "right_only") & ~from_right,
        (indicator == "left_only") & from_left,
        (indicator == "right_only") & from_right,
        (indicator == "both") & ~from_left & ~from_right,
        (indicator == "both") & from_left & ~from_right,
        (indicator == "both") & ~from_left & from_right,
        (indicator == "both") & from_left & from_right,
    ]
    choices = [
        "one-to-zero",
        "zero-to-one",
        "many-to-zero",
        "zero-to-many",
        "one-to-one",
        "many-to-one",
        "one-to-many",
        "many-to-many",
    ]
    merge_type = np.select(conditions, choices, default="unknown")

    unique, counts = np.unique(merge_type, return_counts=True)
    logger.info("Sum of entries after merge: %s", merged.shape[0])
    for name, count in zip(unique, counts, strict=True):
        logger.info("Number of entries of type '%s': %s", name, count)

    return merged.drop(columns="_merge")


@dataclass(frozen=True)
class MatchResult:
    """Detections of one run against the ground truth.

    Attributes:
        entries: Labeled vulnerabilities.
        detected: Detection flag per entry, aligned with ``entries``.
        counts: Correct detections per taxonomy category.
        total: Sum of ``counts``.
        false_positives: Distinct (function, category) detections with no label.
        unlabeled: The false-positive (FunctionId, category) pairs.
    """

    entries: tuple[GroundTruthEntry, ...]
    detected: tuple[bool, ...]
    counts: dict[str, int]
    total: int
    false_positives: int
    unlabeled: tuple[tuple[str, str], ...] = ()

    def outcomes_frame(self) -> pd.DataFrame:
        """One row per labeled entry followed by one per unlabeled detection."""
        rows = [
            [entry.contract, entry.function_id, entry.category, True, flag]
            for entry, flag in zip(self.entries, self.detected, strict=True)
        ]
        rows += [
            [function_id.split(".", 1)[0], function_id, category, False, True]
            for function_id, category in self.unlabeled
        ]
        return pd.DataFrame(rows, columns=OUTCOME_COLUMNS)


def detections_frame(findings: Sequence[AuditFinding], count_not_sure: bool = False) -> pd.DataFrame:
    """List distinct (FunctionId, category) pairs the findings claim.

    Args:
        findings: Parsed findings.
        count_not_sure: Whether a 'Not sure' answer counts as a detection.

    Returns:
        A table with the columns ``functionId`` and ``category``.
    """
    accepted = {Judgment.YES, Judgment.NOT_SURE} if count_not_sure else {Judgment.YES}
    rows = [
        [finding.target, category]
        for finding in findings
        if finding.judgment in accepted
        for category in finding.vuln_types
    ]
    return pd.DataFrame(rows, columns=MATCH_KEYS).drop_duplicates(ignore_index=True)


def match_findings(
    findings: Sequence[AuditFinding],
    ground_truth: Sequence[GroundTruthEntry],
    taxonomy: Taxonomy | None = None,
    count_not_sure: bool = False,
) -> MatchResult:
    """Decide which labeled vulnerabilities a run detected.

    An entry is detected when some finding targets the same function and
    names the same category.

    Args:
        findings: Parsed findings of one run.
        ground_truth: Resolved labeled vulnerabilities.
        taxonomy: Category table for the count order; the packaged one when omitted.
        count_not_sure: Whether a 'Not sure' answer counts as a detection.

    Returns:
        Detection flags, per-category counts and false positives.
    """
    taxonomy = taxonomy if taxonomy is not None else Taxonomy.load()
    detections = detections_frame(findings, count_not_sure)
    truth = pd.DataFrame(
        {
            "entry": range(len(ground_truth)),
            "functionId": [entry.function_id for entry in ground_truth],
            "category": [entry.category for entry in ground_truth],
        }
    )

    merged = indicate_merge(truth, detections.assign(detected=True), how="left", on=MATCH_KEYS)
    merged = merged.sort_values("entry", kind="stable")
    flags = merged["detected"].eq(True).to_numpy()

    labeled = truth[MATCH_KEYS].drop_duplicates().assign(labeled=True)
    claimed = indicate_merge(detections, labeled, how="left", on=MATCH_KEYS)
    unlabeled = claimed.loc[~claimed["labeled"].eq(True), MATCH_KEYS]

    per_category = pd.Series(flags, index=truth["category"].to_numpy(), dtype=int).groupby(level=0).sum()
    counts = {category: int(per_category.get(category, 0)) for category in taxonomy.categories}
    result = MatchResult(
        entries=tuple(ground_truth),
        detected=tuple(bool(flag) for flag in flags),
        counts=counts,
        total=sum(counts.values()),
        false_positives=len(unlabeled),
        unlabeled=tuple((str(f), str(c)) for f, c in unlabeled.itertuples(index=False)),
    )
    logger.info(
        "Detected %s of %s labeled vulnerabilities, %s unlabeled detection(s)",
        result.total,
        len(ground_truth),
        result.false_positives,
    )
    return result


def write_outcomes(result: MatchResult, path: str | Path) -> Path:
    """Write the outcome table of a run as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    result.outcomes_frame().to_csv(path, index=False, lineterminator="\n")
    return path


def read_outcomes(path: str | Path, taxonomy: Taxonomy | None = None) -> MatchResult:
    """Read an outcome table written by :func:`write_outcomes`."""
    taxonomy = taxonomy if taxonomy is not None else Taxonomy.load()
    frame = pd.read_csv(path, dtype={"contract": str, "functionId": str, "category": str}, keep_default_na=False)
    frame["labeled"] = frame["labeled"].astype(str).eq("True")
    frame["detected"] = frame["detected"].astype(str).eq("True")
    labeled = frame[frame["labeled"]]
    unlabeled = frame[~frame["labeled"]]
    entries = tuple(
        GroundTruthEntry(contract=row.contract, function_id=row.functionId, category=row.category)
        for row in labeled.itertuples(index=False)
    )
    detected = tuple(bool(flag) for flag in labeled["detected"])
    per_category = labeled.groupby("category")["detected"].sum()
    counts = {category: int(per_category.get(category, 0)) for category in taxonomy.categories}
    return MatchResult(
        entries=entries,
        detected=detected,
        counts=counts,
        total=sum(counts.values()),
        false_positives=len(unlabeled),
        unlabeled=tuple((row.functionId, row.category) for row in unlabeled.itertuples(index=False)),
    )
