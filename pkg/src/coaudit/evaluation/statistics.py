"""Significance tests, effect sizes and agreement measures for detection runs."""

import logging
import math
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

# Numpy for vector statistics
import numpy as np

# Pandas for contingency tables
import pandas as pd

# Special functions for the chi-squared distribution
from scipy import special

# Contingency-table tests and inter-rater agreement
from statsmodels.stats import inter_rater
from statsmodels.stats.contingency_tables import mcnemar as mcnemar_table

from coaudit.errors import DegenerateCountsError
from coaudit.errors import LengthMismatchError
from coaudit.errors import NegativeStatisticError
from coaudit.errors import NoDiscordantPairsError
from coaudit.errors import PerfectExpectedAgreementError
from coaudit.errors import ZeroPooledSdError
from coaudit.errors import ZeroTotalError
from coaudit.evaluation.groundtruth import GroundTruthEntry

logger = logging.getLogger(__name__)

CRITICAL_VALUE = 3.841


@dataclass(frozen=True)
class PairedOutcome:
    """Whether two runs detected the same labeled vulnerability."""

    entry: GroundTruthEntry
    detected_by_a: bool
    detected_by_b: bool


@dataclass(frozen=True)
class McNemarResult:
    """Continuity-corrected McNemar test over paired detections.

    Attributes:
        b: Entries detected by A only.
        c: Entries detected by B only.
        statistic: (|b - c| - 1)^2 / (b + c).
        p_value: Chi-squared survival function at one degree of freedom.
        critical_value: 3.841, the 5% point at one degree of freedom.
        significant: Whether the statistic exceeds the critical value.
    """

    b: int
    c: int
    statistic: float
    p_value: float
    critical_value: float = CRITICAL_VALUE
    significant: bool = False


@dataclass(frozen=True)
class EffectSize:
    """Cohen's d with the sample statistics it was computed from."""

    mean_a: float
    mean_b: float
    sd_a: float
    sd_b: float
    pooled_sd: float
    cohens_d: float


@dataclass(frozen=True)
class PrecisionRecall:
    """Precision, recall and F1 as percentages."""

    precision: float
    recall: float
    f1: float


def detection_rate(correct: int, total: int) -> float:
    """Share of labeled vulnerabilities detected, in percent.

    Args:
        correct: Correctly detected vulnerabilities.
        total: Labeled vulnerabilities.

    Returns:
        100 * correct / total rounded to two decimals.

    Raises:
        ZeroTotalError: If total is not positive.
    """
    if total <= 0:
        raise ZeroTotalError(f"Detection rate needs a positive total, got {total}")
    return round(100 * correct / total, 2)


def chi_sq_sf(x: float, dof: int = 1) -> float:
    """Survival function of the chi-squared distribution.

    At one degree of freedom this is erfc(sqrt(x / 2)).

    Raises:
        NegativeStatisticError: If x is negative.
        ValueError: If dof is not positive.
    """
    if x < 0:
        raise NegativeStatisticError(f"A chi-squared statistic cannot be negative, got {x}")
    if dof < 1:
        raise ValueError(f"Degrees of freedom must be positive, got {dof}.")
    if dof == 1:
        return float(special.erfc(math.sqrt(x / 2)))
    return float(special.chdtrc(dof, x))


def mcnemar(outcomes: Sequence[PairedOutcome]) -> McNemarResult:
    """Run the continuity-corrected McNemar test.

    Args:
        outcomes: One record per labeled vulnerability.

    Returns:
        The test result.

    Raises:
        ValueError: If no outcomes are given.
        NoDiscordantPairsError: If the runs never disagree.
    """
    if not outcomes:
        raise ValueError("McNemar's test needs at least one paired outcome.")
    b = sum(o.detected_by_a and not o.detected_by_b for o in outcomes)
    c = sum(o.detected_by_b and not o.detected_by_a for o in outcomes)
    if b + c == 0:
        raise NoDiscordantPairsError(
            f"No discordant pairs among {len(outcomes)} outcomes, the statistic is undefined"
        )
    both = sum(o.detected_by_a and o.detected_by_b for o in outcomes)
    table = np.array([[both, b], [c, len(outcomes) - both - b - c]])
    result = mcnemar_table(table, exact=False, correction=True)
    statistic = float(result.statistic)
    return McNemarResult(
        b=b,
        c=c,
        statistic=statistic,
        p_value=float(result.pvalue),
        significant=statistic > CRITICAL_VALUE,
    )


def cohens_d(vec_a: Sequence[float], vec_b: Sequence[float]) -> EffectSize:
    """Standardized mean difference of two per-category count vectors.

    Uses sample standard deviations and the root mean of their squares as
    the pooled deviation.

    Raises:
        LengthMismatchError: If the vectors differ in length.
        ValueError: If the vectors have fewer than two elements.
        ZeroPooledSdError: If both vectors are constant.
    """
    a = np.asarray(vec_a, dtype=float)
    b = np.asarray(vec_b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatchError(f"Vectors of length {a.size} and {b.size} cannot be compared")
    if a.size < 2:
        raise ValueError("Cohen's d needs at least two values per vector.")
    sd_a = float(np.std(a, ddof=1))
    sd_b = float(np.std(b, ddof=1))
    pooled = math.sqrt((sd_a**2 + sd_b**2) / 2)
    if pooled == 0:
        raise ZeroPooledSdError("Both vectors are constant, the pooled deviation is zero")
    mean_a = float(a.mean())
    mean_b = float(b.mean())
    return EffectSize(
        mean_a=mean_a,
        mean_b=mean_b,
        sd_a=sd_a,
        sd_b=sd_b,
        pooled_sd=pooled,
        cohens_d=(mean_a - mean_b) / pooled,
    )


def precision_recall_f1(tp: int, fp: int, fn: int) -> PrecisionRecall:
    """Precision, recall and their harmonic mean, rounded to two decimals.

    Raises:
        DegenerateCountsError: If tp + fp or tp + fn is zero, or tp is zero.
    """
    if tp + fp == 0 or tp + fn == 0:
        raise DegenerateCountsError(f"Counts tp={tp}, fp={fp}, fn={fn} leave a zero denominator")
    if tp == 0:
        raise DegenerateCountsError("With no true positives precision and recall are both zero")
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall)
    return PrecisionRecall(
        precision=round(100 * precision, 2),
        recall=round(100 * recall, 2),
        f1=round(100 * f1, 2),
    )


def cohens_kappa(a: Sequence[Any], b: Sequence[Any]) -> float:
    """Chance-corrected agreement between two label lists.

    Args:
        a: Labels of the first rater.
        b: Labels of the second rater, aligned with ``a``.

    Returns:
        (p_o - p_e) / (1 - p_e).

    Raises:
        LengthMismatchError: If the lists differ in length.
        ValueError: If the lists are empty.
        PerfectExpectedAgreementError: If chance agreement is one.
    """
    if len(a) != len(b):
        raise LengthMismatchError(f"Label lists of length {len(a)} and {len(b)} cannot be compared")
    if not a:
        raise ValueError("Cohen's Kappa needs at least one pair of labels.")
    labels = sorted(set(a) | set(b), key=str)
    table = (
        pd.crosstab(pd.Series(list(a), name="a"), pd.Series(list(b), name="b"))
        .reindex(index=labels, columns=labels, fill_value=0)
        .to_numpy(dtype=float)
    )
    if len(labels) == 1:
        raise PerfectExpectedAgreementError("Both raters use a single label, chance agreement is one")
    return float(inter_rater.cohens_kappa(table).kappa)


def reconstruct_outcomes(
    counts_a: Mapping[str, int],
    counts_b: Mapping[str, int],
    totals: Mapping[str, int],
) -> list[PairedOutcome]:
    """Rebuild paired outcomes from per-category counts.

    Within a category the run with fewer detections is assumed to detect a
    subset of what the other run detects.

    Args:
        counts_a: Correct detections of run A per category.
        counts_b: Correct detections of run B per category.
        totals: Labeled vulnerabilities per category.

    Returns:
        One outcome per labeled vulnerability.

    Raises:
        ValueError: If a count exceeds its category total.
    """
    outcomes = []
    for category, total in totals.items():
        a = counts_a.get(category, 0)
        b = counts_b.get(category, 0)
        if a > total or b > total:
            raise ValueError(
                f"Detections in '{category}' ({a}, {b}) exceed the {total} labeled vulnerabilities."
            )
        both = min(a, b)
        for index in range(total):
            entry = GroundTruthEntry(
                contract="", function_id=f"{category}#{index}", category=category
            )
            outcomes.append(
                PairedOutcome(
                    entry=entry,
                    detected_by_a=index < both or (a > b and index < a),
                    detected_by_b=index < both or (b > a and index < b),
                )
            )
    return outcomes
