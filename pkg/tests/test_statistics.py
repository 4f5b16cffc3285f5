import math

import numpy as np
import pytest
from scipy import integrate

from coaudit.errors import DegenerateCountsError
from coaudit.errors import LengthMismatchError
from coaudit.errors import NegativeStatisticError
from coaudit.errors import NoDiscordantPairsError
from coaudit.errors import PerfectExpectedAgreementError
from coaudit.errors import ZeroPooledSdError
from coaudit.errors import ZeroTotalError
from coaudit.evaluation.groundtruth import GroundTruthEntry
from coaudit.evaluation.statistics import PairedOutcome
from coaudit.evaluation.statistics import chi_sq_sf
from coaudit.evaluation.statistics import cohens_d
from coaudit.evaluation.statistics import cohens_kappa
from coaudit.evaluation.statistics import detection_rate
from coaudit.evaluation.statistics import mcnemar
from coaudit.evaluation.statistics import precision_recall_f1
from coaudit.evaluation.statistics import reconstruct_outcomes

CATEGORIES = [
    "access control",
    "bad randomness",
    "denial of service",
    "reentrancy",
    "arithmetic",
    "front running",
    "unchecked low level calls",
    "time manipulation",
    "short addresses",
    "other",
]

# Correct detections per category on the benchmark, and the labeled totals
CAQ_FULL = [11, 9, 3, 23, 12, 3, 41, 4, 1, 2]
CAQ_CCL = [21, 26, 6, 32, 23, 6, 49, 4, 1, 5]
CWE_FULL = [17, 10, 6, 23, 18, 4, 41, 3, 1, 2]
CWE_CCL = [21, 29, 6, 32, 23, 6, 50, 4, 1, 5]
TOTALS = [23, 30, 6, 32, 23, 6, 54, 4, 1, 5]


def as_counts(vector: list[int]) -> dict[str, int]:
    return dict(zip(CATEGORIES, vector, strict=True))


def paired(a: bool, b: bool, index: int = 0) -> PairedOutcome:
    entry = GroundTruthEntry(contract="C", function_id=f"C.f{index}/0", category="other")
    return PairedOutcome(entry=entry, detected_by_a=a, detected_by_b=b)


@pytest.mark.parametrize(
    "vector, expected",
    [(CAQ_FULL, 59.24), (CAQ_CCL, 94.02), (CWE_FULL, 67.93), (CWE_CCL, 96.20)],
)
def test_detection_rate_benchmark(vector: list[int], expected: float) -> None:
    assert sum(TOTALS) == 184
    assert detection_rate(sum(vector), sum(TOTALS)) == expected


def test_detection_rate_zero_total() -> None:
    assert detection_rate(0, 5) == 0.0
    with pytest.raises(ZeroTotalError):
        detection_rate(0, 0)


def test_chi_sq_sf_known_values() -> None:
    assert chi_sq_sf(0) == 1.0
    assert chi_sq_sf(3.841) == pytest.approx(0.05, abs=1e-3)
    assert chi_sq_sf(2.25) == pytest.approx(0.1336, abs=1e-4)
    assert chi_sq_sf(4.0, dof=2) == pytest.approx(math.exp(-2.0))


@pytest.mark.parametrize("x", [0.1, 1.0, 2.25, 3.841, 10.0, 50.0])
def test_chi_sq_sf_matches_integrated_density(x: float) -> None:
    def density(t: float) -> float:
        return math.exp(-t / 2) / math.sqrt(2 * math.pi * t)

    tail, _ = integrate.quad(density, x, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert chi_sq_sf(x) == pytest.approx(tail, abs=1e-8)


def test_chi_sq_sf_decreasing() -> None:
    values = [chi_sq_sf(x) for x in np.linspace(0, 30, 61)]
    assert all(later < earlier for earlier, later in zip(values, values[1:], strict=False))


def test_chi_sq_sf_invalid() -> None:
    with pytest.raises(NegativeStatisticError):
        chi_sq_sf(-0.5)
    with pytest.raises(ValueError, match="Degrees of freedom"):
        chi_sq_sf(1.0, dof=0)


@pytest.mark.parametrize(
    "vec_a, vec_b, b, c, statistic, significant",
    [
        (CAQ_CCL, CAQ_FULL, 64, 0, 62.0156, True),
        (CWE_CCL, CWE_FULL, 52, 0, 50.0192, True),
        (CAQ_CCL, CWE_CCL, 0, 4, 2.25, False),
    ],
)
def test_mcnemar_benchmark(
    vec_a: list[int], vec_b: list[int], b: int, c: int, statistic: float, significant: bool
) -> None:
    outcomes = reconstruct_outcomes(as_counts(vec_a), as_counts(vec_b), as_counts(TOTALS))
    assert len(outcomes) == 184

    result = mcnemar(outcomes)
    assert (result.b, result.c) == (b, c)
    assert result.statistic == pytest.approx(statistic, abs=1e-4)
    assert result.significant is significant
    assert result.p_value == pytest.approx(chi_sq_sf(result.statistic))


def test_mcnemar_symmetric() -> None:
    outcomes = [paired(True, False, 0), paired(True, False, 1), paired(False, True, 2), paired(True, True, 3)]
    swapped = [paired(o.detected_by_b, o.detected_by_a, i) for i, o in enumerate(outcomes)]

    forward = mcnemar(outcomes)
    backward = mcnemar(swapped)
    assert (forward.b, forward.c) == (backward.c, backward.b)
    assert forward.statistic == backward.statistic
    assert forward.p_value == backward.p_value


def test_mcnemar_ignores_concordant_pairs() -> None:
    discordant = [paired(True, False, i) for i in range(5)] + [paired(False, True, 5)]
    concordant = [paired(True, True, 6 + i) for i in range(20)] + [paired(False, False, 26)]

    result = mcnemar(discordant + concordant)
    assert (result.b, result.c) == (5, 1)
    assert result.statistic == pytest.approx(9 / 6)
    assert result.statistic == mcnemar(discordant).statistic
    assert not result.significant


def test_mcnemar_invalid() -> None:
    with pytest.raises(ValueError, match="at least one"):
        mcnemar([])
    with pytest.raises(NoDiscordantPairsError):
        mcnemar([paired(True, True), paired(False, False, 1)])


def test_reconstruct_outcomes_subset() -> None:
    outcomes = reconstruct_outcomes({"other": 3}, {"other": 1}, {"other": 5})
    flags = [(o.detected_by_a, o.detected_by_b) for o in outcomes]
    assert flags == [(True, True), (True, False), (True, False), (False, False), (False, False)]

    with pytest.raises(ValueError, match="exceed the"):
        reconstruct_outcomes({"other": 6}, {}, {"other": 5})


def test_cohens_d_benchmark() -> None:
    caq = cohens_d(CAQ_FULL, CAQ_CCL)
    assert caq.mean_a == pytest.approx(10.9)
    assert caq.mean_b == pytest.approx(17.3)
    assert caq.sd_b == pytest.approx(15.61, abs=0.01)
    assert caq.cohens_d == pytest.approx(-0.45, abs=0.01)

    assert cohens_d(CWE_FULL, CWE_CCL).cohens_d == pytest.approx(-0.36, abs=0.01)

    ccl = cohens_d(CAQ_CCL, CWE_CCL)
    assert ccl.sd_b == pytest.approx(16.04, abs=0.01)
    assert ccl.cohens_d == pytest.approx(-0.025, abs=0.001)


def test_cohens_d_antisymmetric() -> None:
    assert cohens_d(CAQ_CCL, CAQ_FULL).cohens_d == pytest.approx(-cohens_d(CAQ_FULL, CAQ_CCL).cohens_d)


def test_cohens_d_invalid() -> None:
    with pytest.raises(LengthMismatchError):
        cohens_d([1, 2, 3], [1, 2])
    with pytest.raises(ValueError, match="at least two"):
        cohens_d([1], [2])
    with pytest.raises(ZeroPooledSdError):
        cohens_d([4, 4, 4], [7, 7, 7])


def test_precision_recall_f1() -> None:
    scores = precision_recall_f1(tp=173, fp=5, fn=11)
    assert (scores.precision, scores.recall, scores.f1) == (97.19, 94.02, 95.58)

    perfect = precision_recall_f1(tp=3, fp=0, fn=0)
    assert (perfect.precision, perfect.recall, perfect.f1) == (100.0, 100.0, 100.0)


def test_precision_recall_f1_degenerate() -> None:
    with pytest.raises(DegenerateCountsError):
        precision_recall_f1(tp=0, fp=0, fn=4)
    with pytest.raises(DegenerateCountsError, match="no true positives"):
        precision_recall_f1(tp=0, fp=2, fn=4)


def test_cohens_kappa_from_table() -> None:
    table = [[10, 1, 1], [1, 4, 0], [0, 1, 2]]
    rater_a, rater_b = [], []
    for row, counts in enumerate(table, start=1):
        for column, count in enumerate(counts, start=1):
            rater_a += [row] * count
            rater_b += [column] * count

    assert cohens_kappa(rater_a, rater_b) == pytest.approx(0.6507, abs=1e-4)


def test_cohens_kappa_bounds() -> None:
    assert cohens_kappa([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(0.0)
    assert cohens_kappa([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert cohens_kappa(["a", "b"], ["b", "a"]) == pytest.approx(-1.0)


def test_cohens_kappa_random_within_range() -> None:
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(1000):
        size = int(rng.integers(1, 30))
        a = rng.integers(1, 4, size=size).tolist()
        b = rng.integers(1, 4, size=size).tolist()
        try:
            kappa = cohens_kappa(a, b)
        except PerfectExpectedAgreementError:
            continue
        checked += 1
        assert -1.0 - 1e-12 <= kappa <= 1.0 + 1e-12
    assert checked > 900


def test_cohens_kappa_invalid() -> None:
    with pytest.raises(LengthMismatchError):
        cohens_kappa([1, 2], [1])
    with pytest.raises(ValueError, match="at least one"):
        cohens_kappa([], [])
    with pytest.raises(PerfectExpectedAgreementError):
        cohens_kappa([2, 2, 2], [2, 2, 2])
