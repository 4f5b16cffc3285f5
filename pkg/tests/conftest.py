from pathlib import Path
from typing import Any

import pytest

from coaudit.auditing.gateway import LlmRequest
from coaudit.scoping.callgraph import CallGraph
from coaudit.scoping.callgraph import build_fcg
from coaudit.scoping.ccl import CodeCallList
from coaudit.scoping.ccl import generate_all_ccls
from coaudit.scoping.ingest import FlattenedSource
from coaudit.scoping.ingest import flatten
from coaudit.scoping.ingest import load_project
from coaudit.scoping.ingest import read_remappings
from coaudit.scoping.parser import parse

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def vault_root() -> Path:
    return FIXTURES / "tokenizing_vault"


@pytest.fixture
def etherbank_root() -> Path:
    return FIXTURES / "etherbank"


@pytest.fixture
def vault_flat(vault_root: Path) -> FlattenedSource:
    remappings = read_remappings(vault_root / "remappings.txt")
    return flatten(load_project(vault_root, "src/TokenizingVault.sol", remappings))


@pytest.fixture
def etherbank_flat(etherbank_root: Path) -> FlattenedSource:
    return flatten(load_project(etherbank_root, "src/EtherBank.sol"))


@pytest.fixture
def vault_graph(vault_flat: FlattenedSource) -> CallGraph:
    return build_fcg(parse(vault_flat))


@pytest.fixture
def vault_ccls(vault_graph: CallGraph, vault_flat: FlattenedSource) -> dict[str, CodeCallList]:
    return generate_all_ccls(vault_graph, vault_flat).ccls


# Answers of a well-behaved model for the EtherBank functions
CANNED_RESPONSES = {
    "EtherBank.deposit/0": "1. No, the function only updates balances with checked arithmetic.",
    "EtherBank.withdraw/1": (
        "1. Yes, the function is vulnerable to reentrancy.\n"
        "2. Explain in details how this vulnerability can be exploited: An attacker contract "
        "calls withdraw and receives Ether before its balance is reduced.\n"
        "3. The business impact of this vulnerabilities in one sentence: function leads to "
        "loss of all deposited Ether.\n"
        "4. The potential solutions of this vulnerabilities: Update `balances[msg.sender]` "
        "before sending Ether."
    ),
    "EtherBank.sweep/1": (
        "1. Yes, there is an access control vulnerability.\n"
        "2. Explain in details how this vulnerability can be exploited: Anyone can call sweep "
        "with their own address and take the whole balance.\n"
        "3. The business impact of this vulnerabilities in one sentence: function leads to "
        "theft of every deposit.\n"
        "4. The potential solutions of this vulnerabilities: Add the `onlyOwner` modifier to sweep."
    ),
    "EtherBank.lottery/0": "1. Not sure. The outcome has bad randomness since miners can steer it.",
    "EtherBank.withdrawAll/0": "1. No.",
}


@pytest.fixture
def canned_backend(monkeypatch: pytest.MonkeyPatch) -> list[str]:
    """Replace the live backend of the pipeline; returns the audited targets."""
    calls: list[str] = []

    class CannedBackend:
        def __init__(self, **kwargs: Any) -> None:
            pass

        def complete(self, request: LlmRequest) -> str:
            calls.append(request.target)
            return CANNED_RESPONSES.get(request.target, "1. No.")

    monkeypatch.setattr("coaudit.pipeline.LiveBackend", CannedBackend)
    return calls
