import pytest

from coaudit import parse_response
from coaudit.auditing.prompts import CweEntry
from coaudit.auditing.prompts import PromptInstance
from coaudit.auditing.responses import Judgment
from coaudit.auditing.responses import judge


@pytest.fixture
def prompt() -> PromptInstance:
    return PromptInstance(
        target="EtherBank.withdraw/1", mode="CAQ", cwe=None, text="", token_estimate=0
    )


WITHDRAW_RESPONSE = (
    "1. Yes, the function is vulnerable to reentrancy.\n"
    "2. Explain in details how this vulnerability can be exploited: An attacker contract "
    "calls withdraw and receives Ether before its balance is reduced, so it can call "
    "withdraw again from its fallback function.\n"
    "3. The business impact of this vulnerabilities in one sentence: function leads to "
    "loss of all deposited Ether.\n"
    "4. The potential solutions of this vulnerabilities: Update `balances[msg.sender]` "
    "before sending Ether."
)


def test_parse_full_response(prompt: PromptInstance) -> None:
    finding = parse_response(WITHDRAW_RESPONSE, prompt)
    assert finding.judgment == Judgment.YES
    assert finding.contract == "EtherBank"
    assert finding.vuln_types == ("reentrancy",)
    assert finding.exploitation.startswith("An attacker contract calls withdraw")
    assert finding.impact == "function leads to loss of all deposited Ether."
    assert finding.solutions == "Update `balances[msg.sender]` before sending Ether."
    assert finding.locations == ("balances[msg.sender]",)
    assert finding.raw == WITHDRAW_RESPONSE


def test_parse_markdown_headers(prompt: PromptInstance) -> None:
    text = (
        "**1.** Yes, there is a front-running issue.\n\n"
        "**2.** Exploitation: a watcher copies the transaction with a higher gas price.\n\n"
        "**3.** Business impact: function leads to stolen rewards.\n\n"
        "**4.** Fix: use a commit and reveal scheme.\n"
        "```solidity\nrewards[msg.sender] = 0;\n```\n"
    )
    finding = parse_response(text, prompt)
    assert finding.judgment == Judgment.YES
    assert finding.vuln_types == ("front running",)
    assert finding.exploitation == "a watcher copies the transaction with a higher gas price."
    assert finding.impact == "function leads to stolen rewards."
    assert finding.locations == ("rewards[msg.sender] = 0;",)


def test_parse_no(prompt: PromptInstance) -> None:
    finding = parse_response("1. No, the balance is updated first.", prompt)
    assert finding.judgment == Judgment.NO
    assert finding.vuln_types == ()
    assert finding.exploitation == ""


def test_parse_not_sure_keeps_named_categories(prompt: PromptInstance) -> None:
    finding = parse_response("1. Not sure, possibly reentrancy through the fallback.", prompt)
    assert finding.judgment == Judgment.NOT_SURE
    assert finding.vuln_types == ("reentrancy",)
    assert finding.exploitation == ""

    finding = parse_response("1. Not sure.", prompt)
    assert finding.vuln_types == ()


def test_parse_unparseable(prompt: PromptInstance) -> None:
    text = "I cannot audit this code."
    finding = parse_response(text, prompt)
    assert finding.judgment == Judgment.UNPARSEABLE
    assert finding.raw == text
    assert parse_response("", prompt).judgment == Judgment.UNPARSEABLE


def test_parse_cwe_mode_uses_catalog_name() -> None:
    prompt = PromptInstance(
        target="EtherBank.sweep/1",
        mode="CWE",
        cwe=CweEntry(id="VT01", name="access control"),
        text="",
        token_estimate=0,
    )
    finding = parse_response("1. Yes.\n2. Anyone can sweep the balance.", prompt)
    assert finding.vuln_types == ("access control",)
    assert finding.cwe == "access control"


def test_judge_ignores_echoed_question() -> None:
    assert judge("Are there any vulnerabilities? No.") == Judgment.NO
    assert judge("Are there any reentrancy vulnerabilities? Yes, one.") == Judgment.YES
    echoed = (
        "Are there any vulnerabilities? Provide a brief initial response with one of the "
        "following: 'Yes,' 'No,' or 'Not sure.' If your answer is 'No,' you can stop here. "
        "If your answer is 'Yes,' proceed to the next steps. Not sure."
    )
    assert judge(echoed) == Judgment.NOT_SURE
    assert judge("Possibly.") == Judgment.UNPARSEABLE
