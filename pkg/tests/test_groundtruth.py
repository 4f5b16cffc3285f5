from pathlib import Path

import pandas as pd
import pytest

from coaudit.auditing.taxonomy import Taxonomy
from coaudit.errors import UnresolvedGroundTruthError
from coaudit.evaluation.groundtruth import GROUND_TRUTH_COLUMNS
from coaudit.evaluation.groundtruth import ground_truth_counts
from coaudit.evaluation.groundtruth import import_smartbugs
from coaudit.evaluation.groundtruth import import_solidifi
from coaudit.evaluation.groundtruth import read_ground_truth
from coaudit.evaluation.groundtruth import resolve_ground_truth
from coaudit.evaluation.groundtruth import write_ground_truth
from coaudit.scoping.ingest import FlattenedSource
from coaudit.scoping.ingest import load_project
from coaudit.scoping.parser import parse

ANNOTATED = """pragma solidity ^0.4.24;

contract Lotto {
    bool public payedOut = false;
    address public winner;
    uint256 public winAmount;

    function sendToWinner() public {
        require(!payedOut);
        // <yes> <report> UNCHECKED_LL_CALLS
        winner.send(winAmount);
        payedOut = true;
    }

    function withdrawLeftOver() public {
        require(payedOut);
        // <yes> <report> ACCESS_CONTROL

        msg.sender.send(this.balance);
    }
}
"""

OVERLOADED = """contract A {
    function f(uint256 a) public {}
    function f(uint256 a, uint256 b) public {}
}
"""


@pytest.fixture
def etherbank_sources(etherbank_root: Path) -> dict[str, str]:
    project = load_project(etherbank_root, "src/EtherBank.sol")
    return {path: file.content for path, file in project.files.items()}


def test_read_ground_truth(etherbank_root: Path) -> None:
    frame = read_ground_truth(etherbank_root / "ground_truth.csv")

    assert frame.columns.tolist() == GROUND_TRUTH_COLUMNS
    assert frame["location"].tolist() == ["withdraw", "sweep", "31"]
    assert frame["category"].tolist() == ["reentrancy", "access control", "bad randomness"]


def test_read_ground_truth_invalid(tmp_path: Path) -> None:
    path = tmp_path / "missing.csv"
    path.write_text("contract,location,category\nA,f,reentrancy\n")
    with pytest.raises(ValueError, match="path"):
        read_ground_truth(path)

    path = tmp_path / "unknown.csv"
    path.write_text("contract,path,location,category\nA,a.sol,f,flash loan\n")
    with pytest.raises(ValueError, match="flash loan"):
        read_ground_truth(path)


def test_write_ground_truth(etherbank_root: Path, tmp_path: Path) -> None:
    frame = read_ground_truth(etherbank_root / "ground_truth.csv")
    path = write_ground_truth(frame, tmp_path / "out" / "truth.csv")

    assert read_ground_truth(path).equals(frame)


def test_resolve_by_name_and_line(
    etherbank_root: Path, etherbank_flat: FlattenedSource, etherbank_sources: dict[str, str]
) -> None:
    frame = read_ground_truth(etherbank_root / "ground_truth.csv")
    entries = resolve_ground_truth(frame, parse(etherbank_flat), etherbank_flat, etherbank_sources)

    assert [e.function_id for e in entries] == [
        "EtherBank.withdraw/1",
        "EtherBank.sweep/1",
        "EtherBank.lottery/0",
    ]
    assert {e.contract for e in entries} == {"EtherBank"}
    assert [e.lines for e in entries] == [None, None, (31, 31)]
    assert entries[2].path == "src/EtherBank.sol"


def test_resolve_line_range_skips_blank_lines(
    etherbank_flat: FlattenedSource, etherbank_sources: dict[str, str]
) -> None:
    # Line 25 is blank, line 26 opens sweep
    frame = pd.DataFrame(
        [["EtherBank", "src/EtherBank.sol", "25-27", "access control"]], columns=GROUND_TRUTH_COLUMNS
    )
    entries = resolve_ground_truth(frame, parse(etherbank_flat), etherbank_flat, etherbank_sources)

    assert entries[0].function_id == "EtherBank.sweep/1"
    assert entries[0].lines == (25, 27)


def test_resolve_line_needs_sources(etherbank_flat: FlattenedSource) -> None:
    frame = pd.DataFrame([["EtherBank", "src/EtherBank.sol", "31", "bad randomness"]], columns=GROUND_TRUTH_COLUMNS)
    with pytest.raises(UnresolvedGroundTruthError, match="Source of"):
        resolve_ground_truth(frame, parse(etherbank_flat), etherbank_flat)


def test_resolve_unknown_location(etherbank_flat: FlattenedSource) -> None:
    frame = pd.DataFrame([["EtherBank", "src/EtherBank.sol", "drain", "other"]], columns=GROUND_TRUTH_COLUMNS)
    with pytest.raises(UnresolvedGroundTruthError, match="maps to no function"):
        resolve_ground_truth(frame, parse(etherbank_flat))


def test_resolve_overloads() -> None:
    unit = parse(OVERLOADED)
    ambiguous = pd.DataFrame([["A", "a.sol", "f", "other"]], columns=GROUND_TRUTH_COLUMNS)
    with pytest.raises(UnresolvedGroundTruthError, match="overloaded"):
        resolve_ground_truth(ambiguous, unit)

    frame = pd.DataFrame(
        [["A", "a.sol", "f/2", "other"], ["", "a.sol", "A.f/1", "arithmetic"]], columns=GROUND_TRUTH_COLUMNS
    )
    assert [e.function_id for e in resolve_ground_truth(frame, unit)] == ["A.f/2", "A.f/1"]


def test_import_smartbugs(tmp_path: Path) -> None:
    path = tmp_path / "contracts" / "lotto.sol"
    path.parent.mkdir()
    path.write_text(ANNOTATED)

    frame = import_smartbugs(path, root=tmp_path)
    assert frame.values.tolist() == [
        ["", "contracts/lotto.sol", "11", "unchecked low level calls"],
        ["", "contracts/lotto.sol", "19", "access control"],
    ]

    entries = resolve_ground_truth(frame, parse(ANNOTATED))
    assert [e.function_id for e in entries] == ["Lotto.sendToWinner/0", "Lotto.withdrawLeftOver/0"]


def test_import_solidifi(tmp_path: Path) -> None:
    log = tmp_path / "BugLog.csv"
    log.write_text(
        "loc,length,bug type,approach\n"
        "19,3,Re-entrancy,code snippet injection\n"
        "31,1,Timestamp-Dependency,code snippet injection\n"
        "14,0,Overflow-Underflow,code snippet injection\n"
        "27,1,TOD,code snippet injection\n"
    )
    frame = import_solidifi(log, "src/EtherBank.sol")

    assert frame["location"].tolist() == ["19-21", "31-31", "14-14", "27-27"]
    assert frame["category"].tolist() == ["reentrancy", "time manipulation", "arithmetic", "front running"]
    assert set(frame["path"]) == {"src/EtherBank.sol"}


def test_ground_truth_counts(
    etherbank_root: Path, etherbank_flat: FlattenedSource, etherbank_sources: dict[str, str]
) -> None:
    frame = read_ground_truth(etherbank_root / "ground_truth.csv")
    entries = resolve_ground_truth(frame, parse(etherbank_flat), etherbank_flat, etherbank_sources)
    counts = ground_truth_counts(entries, Taxonomy.load().categories)

    assert list(counts) == list(Taxonomy.load().categories)
    assert counts["reentrancy"] == 1
    assert counts["bad randomness"] == 1
    assert sum(counts.values()) == 3
