"""Render CAQ and CWE audit prompts from Code Call Lists."""

import json
import logging
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import asdict
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Literal

# Pandas for reading the vulnerability catalog
import pandas as pd

from coaudit.errors import EmptyCatalogError
from coaudit.scoping.ccl import CodeCallList
from coaudit.scoping.ccl import estimate_tokens

logger = logging.getLogger(__name__)

PromptMode = Literal["CAQ", "CWE"]

CODE_SLOT = "{CODE}"
CWE_SLOT = "{CWE_TYPE}"

# Wording kept exactly as the audited prompt was phrased
CAQ_TEMPLATE = (
    "Analyze the following code, respond me in this format (fill in the part): "
    "1. Are there any vulnerabilities? Provide a brief initial response with one of "
    "the following: 'Yes,' 'No,' or 'Not sure.' If your answer is 'No,' you can stop "
    "here. If your answer is 'Yes,' proceed to the next steps. "
    "2. Explain in details how this vulnerability can be exploited :___. "
    "3. The business impact of this vulnerabilities in one sentence: function leads to. "
    "4. The potential solutions of this vulnerabilities. "
    "Note: You can state more than one lines which have this vulnerability! This is a "
    "short extraction of the solidity code and please assume all the variables in this "
    "code have been defined. {CODE}"
)
CWE_TEMPLATE = CAQ_TEMPLATE.replace(
    "Are there any vulnerabilities?", f"Are there any {CWE_SLOT} vulnerabilities?"
)


@dataclass(frozen=True)
class CweEntry:
    """One vulnerability type of the catalog."""

    id: str
    name: str
    description: str | None = None


@dataclass(frozen=True)
class PromptInstance:
    """A rendered prompt for one target function.

    Attributes:
        target: FunctionId the prompt audits.
        mode: CAQ or CWE.
        cwe: The catalog entry asked about, CWE mode only.
        text: The full prompt text.
        token_estimate: Estimate for template plus code.
    """

    target: str
    mode: PromptMode
    cwe: CweEntry | None
    text: str
    token_estimate: int


def load_catalog(path: str | Path | None = None) -> list[CweEntry]:
    """Read a vulnerability catalog with columns id, name, description.

    Args:
        path: CSV file. The packaged 38-entry catalog is used when omitted.

    Returns:
        Catalog entries in file order.

    Raises:
        ValueError: If ids repeat or required columns are missing.
    """
    source = Path(path) if path is not None else files("coaudit") / "data" / "cwe_catalog.csv"
    with source.open(encoding="utf-8") as handle:
        catalog = pd.read_csv(handle, dtype=str, keep_default_na=False)

    missing = {"id", "name"} - set(catalog.columns)
    if missing:
        raise ValueError(f"Catalog is missing the column(s): {', '.join(sorted(missing))}")
    duplicated = catalog["id"][catalog["id"].duplicated()]
    if not duplicated.empty:
        raise ValueError(f"Catalog ids must be unique, repeated: {', '.join(duplicated)}")

    descriptions = catalog["description"] if "description" in catalog else [""] * len(catalog)
    return [
        CweEntry(id=entry_id, name=name, description=description or None)
        for entry_id, name, description in zip(catalog["id"], catalog["name"], descriptions)
    ]


def _code_block(ccl: CodeCallList) -> str:
    return f"```solidity\n{ccl.code}\n```"


def render_caq(ccl: CodeCallList) -> PromptInstance:
    """Render the CAQ prompt for one CCL."""
    text = CAQ_TEMPLATE.replace(CODE_SLOT, _code_block(ccl))
    return PromptInstance(
        target=ccl.target,
        mode="CAQ",
        cwe=None,
        text=text,
        token_estimate=estimate_tokens(text),
    )


def render_cwe(ccl: CodeCallList, cwe: CweEntry) -> PromptInstance:
    """Render the CWE prompt for one CCL and one vulnerability type.

    Args:
        ccl: The code call list.
        cwe: Catalog entry whose name fills the vulnerability slot.

    Returns:
        The rendered prompt.
    """
    text = CWE_TEMPLATE.replace(CWE_SLOT, cwe.name).replace(CODE_SLOT, _code_block(ccl))
    return PromptInstance(
        target=ccl.target,
        mode="CWE",
        cwe=cwe,
        text=text,
        token_estimate=estimate_tokens(text),
    )


def plan_audit(
    ccls: Mapping[str, CodeCallList],
    mode: PromptMode,
    catalog: Sequence[CweEntry] | None = None,
) -> list[PromptInstance]:
    """Plan every prompt of an audit campaign.

    Args:
        ccls: CCLs keyed by FunctionId, in declaration order.
        mode: CAQ gives one prompt per CCL, CWE one per CCL and catalog entry.
        catalog: Vulnerability catalog, required in CWE mode.

    Returns:
        Prompts ordered function-major, catalog order within a function.

    Raises:
        EmptyCatalogError: If CWE mode is requested without catalog entries.
        ValueError: If the mode is unknown.
    """
    if mode == "CAQ":
        plan = [render_caq(ccl) for ccl in ccls.values()]
    elif mode == "CWE":
        if not catalog:
            raise EmptyCatalogError("CWE prompts need at least one catalog entry")
        plan = [render_cwe(ccl, cwe) for ccl in ccls.values() for cwe in catalog]
    else:
        raise ValueError(f"Unknown prompt mode {mode!r}, expected 'CAQ' or 'CWE'.")
    logger.info("Planned %s %s prompt(s) for %s function(s)", len(plan), mode, len(ccls))
    return plan


def write_plan(plan: Sequence[PromptInstance], path: str | Path) -> Path:
    """Write a plan as JSON lines (target, mode, cwe, text, token_estimate)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for prompt in plan:
            handle.write(json.dumps(asdict(prompt)) + "\n")
    return path


def read_plan(path: str | Path) -> list[PromptInstance]:
    """Read a plan written by :func:`write_plan`."""
    plan = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            cwe = CweEntry(**record["cwe"]) if record["cwe"] else None
            plan.append(
                PromptInstance(
                    target=record["target"],
                    mode=record["mode"],
                    cwe=cwe,
                    text=record["text"],
                    token_estimate=record["token_estimate"],
                )
            )
    return plan
