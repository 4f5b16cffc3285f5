"""Parse numbered audit responses into findings."""

import logging
import re
from dataclasses import dataclass
from enum import Enum

from coaudit.auditing.prompts import PromptInstance
from coaudit.auditing.prompts import PromptMode
from coaudit.auditing.taxonomy import Taxonomy

logger = logging.getLogger(__name__)


class Judgment(str, Enum):
    """Answer to 'Are there any vulnerabilities?'."""

    YES = "Yes"
    NO = "No"
    NOT_SURE = "Not sure"
    UNPARSEABLE = "Unparseable"


@dataclass(frozen=True)
class AuditFinding:
    """One parsed response.

    Attributes:
        target: FunctionId the prompt audited.
        contract: Contract of the target.
        mode: Prompt mode.
        cwe: Catalog entry name asked about in CWE mode.
        judgment: The parsed answer.
        vuln_types: Taxonomy categories of the reported vulnerability.
        exploitation: Item 2, empty unless the judgment is Yes.
        impact: Item 3, empty unless the judgment is Yes.
        solutions: Item 4, empty unless the judgment is Yes.
        locations: Code lines quoted in backticks or code fences.
        raw: The full response text.
    """

    target: str
    contract: str
    mode: PromptMode
    cwe: str | None
    judgment: Judgment
    vuln_types: tuple[str, ...] = ()
    exploitation: str = ""
    impact: str = ""
    solutions: str = ""
    locations: tuple[str, ...] = ()
    raw: str = ""


# "1.", "1)", "**1.**", "### 1." at a line start or after whitespace
_HEADER = re.compile(r"(?:^|(?<=\s))(?:#+\s*)?(?:\*\*)?\s*([1-4])\s*[.)](?!\d)(?:\*\*)?", re.MULTILINE)
_QUESTION = re.compile(r"are there any\b.*?vulnerabilit(?:y|ies)\s*\?", re.IGNORECASE | re.DOTALL)
_INSTRUCTION = re.compile(
    r"provide a brief initial response.*?(?:proceed to the next steps\.?|$)",
    re.IGNORECASE | re.DOTALL,
)
_ANSWER = re.compile(r"\bnot\s+sure\b|\byes\b|\bno\b", re.IGNORECASE)
_LABELS = {
    2: re.compile(
        r"^(?:explain in details? how (?:this|the) vulnerability can be exploited|"
        r"exploitation(?: scenario)?|proof of concept|how it can be exploited)\s*(?:\*\*)?\s*:?\s*(?:_{2,}\s*\.?)?",
        re.IGNORECASE,
    ),
    3: re.compile(
        r"^(?:the )?business impact(?: of th(?:is|ese) vulnerabilit(?:y|ies))?"
        r"(?: in one sentence)?\s*(?:\*\*)?\s*:?\s*(?:_{2,}\s*\.?)?",
        re.IGNORECASE,
    ),
    4: re.compile(
        r"^(?:the )?(?:potential )?(?:solutions?|fix(?:es)?|mitigations?)"
        r"(?: (?:of|for|to) th(?:is|ese) vulnerabilit(?:y|ies))?\s*(?:\*\*)?\s*[:.]?",
        re.IGNORECASE,
    ),
}
_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_INLINE = re.compile(r"`([^`\n]+)`")


def _sections(text: str) -> dict[int, str]:
    """Split a response at its numbered headers, taking them in order 1..4."""
    headers = list(_HEADER.finditer(text))
    positions: dict[int, tuple[int, int]] = {}
    expected = 1
    for header in headers:
        number = int(header.group(1))
        if number == expected or (expected > 1 and number > expected and number not in positions):
            positions[number] = (header.start(), header.end())
            expected = number + 1
        if expected > 4:
            break
    ordered = sorted(positions.items(), key=lambda item: item[1][0])
    sections = {}
    for index, (number, (_, body_start)) in enumerate(ordered):
        body_end = ordered[index + 1][1][0] if index + 1 < len(ordered) else len(text)
        sections[number] = text[body_start:body_end].strip()
    return sections


def _clean(section: str, number: int) -> str:
    section = section.strip().lstrip("*").strip()
    section = _LABELS[number].sub("", section, count=1)
    return section.strip().strip("*").strip()


def _locations(text: str) -> tuple[str, ...]:
    found: list[str] = []
    for block in _FENCE.finditer(text):
        found.extend(line.strip() for line in block.group(1).splitlines() if line.strip())
    outside = _FENCE.sub(" ", text)
    found.extend(match.group(1).strip() for match in _INLINE.finditer(outside))
    return tuple(dict.fromkeys(line for line in found if line))


def judge(first_item: str) -> Judgment:
    """Read the answer of item 1, ignoring an echoed question.

    The earliest of 'not sure', 'yes' and 'no' wins.
    """
    answer = _INSTRUCTION.sub(" ", _QUESTION.sub(" ", first_item))
    match = _ANSWER.search(answer)
    if match is None:
        return Judgment.UNPARSEABLE
    token = " ".join(match.group(0).lower().split())
    return {"yes": Judgment.YES, "no": Judgment.NO}.get(token, Judgment.NOT_SURE)


def parse_response(
    text: str, prompt: PromptInstance, taxonomy: Taxonomy | None = None
) -> AuditFinding:
    """Parse one four-part audit response.

    Args:
        text: Response text.
        prompt: The prompt the response answers.
        taxonomy: Category table; the packaged one when omitted.

    Returns:
        The finding. Responses without a first numbered item or without a
        recognizable answer have judgment Unparseable and keep ``raw``.
    """
    taxonomy = taxonomy if taxonomy is not None else Taxonomy.load()
    contract = prompt.target.split(".", 1)[0]
    cwe = prompt.cwe.name if prompt.cwe else None
    sections = _sections(text) if text.strip() else {}

    judgment = judge(sections[1]) if 1 in sections else Judgment.UNPARSEABLE
    if judgment == Judgment.UNPARSEABLE:
        logger.warning("Could not read the answer of the response for %s", prompt.target)
        return AuditFinding(
            target=prompt.target,
            contract=contract,
            mode=prompt.mode,
            cwe=cwe,
            judgment=judgment,
            raw=text,
        )
    if judgment == Judgment.NO:
        return AuditFinding(
            target=prompt.target,
            contract=contract,
            mode=prompt.mode,
            cwe=cwe,
            judgment=judgment,
            raw=text,
        )

    detected = judgment == Judgment.YES
    exploitation = _clean(sections.get(2, ""), 2) if detected else ""
    if prompt.mode == "CWE" and cwe is not None:
        vuln_types = taxonomy.classify(cwe, detected=detected)
    else:
        answer = _INSTRUCTION.sub(" ", _QUESTION.sub(" ", sections[1]))
        vuln_types = taxonomy.classify(f"{answer}\n{exploitation}", detected=detected)

    return AuditFinding(
        target=prompt.target,
        contract=contract,
        mode=prompt.mode,
        cwe=cwe,
        judgment=judgment,
        vuln_types=tuple(vuln_types),
        exploitation=exploitation,
        impact=_clean(sections.get(3, ""), 3) if detected else "",
        solutions=_clean(sections.get(4, ""), 4) if detected else "",
        locations=_locations(text) if detected else (),
        raw=text,
    )
