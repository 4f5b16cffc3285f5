"""Assemble audit findings into CSV, markdown and JSON reports."""

import json
import logging
from collections import Counter
from collections.abc import Sequence
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from io import StringIO
from pathlib import Path
from typing import Any
from typing import Literal

# Pandas for table management
import pandas as pd

from coaudit.auditing.responses import AuditFinding
from coaudit.auditing.responses import Judgment
from coaudit.errors import MixedContractsError

logger = logging.getLogger(__name__)

ReportFormat = Literal["csv", "markdown", "json"]

CSV_COLUMNS = [
    "contract",
    "functionId",
    "mode",
    "cwe",
    "judgment",
    "categories",
    "locations",
    "exploitation",
    "impact",
    "solutions",
]


@dataclass(frozen=True)
class AuditReport:
    """Findings of one contract with summary counts.

    Attributes:
        contract: Contract name, empty for a report without findings.
        findings: Findings in report order.
        judgment_counts: Number of findings per judgment value.
        category_counts: Number of findings naming each category.
        metadata: Free-form generation details (model tag, mode, date).
    """

    contract: str
    findings: tuple[AuditFinding, ...]
    judgment_counts: dict[str, int]
    category_counts: dict[str, int]
    metadata: dict[str, Any] = field(default_factory=dict)


def _ordered(
    findings: Sequence[AuditFinding],
    function_order: Sequence[str] | None,
    cwe_order: Sequence[str] | None,
) -> list[AuditFinding]:
    """Sort by function declaration order, then catalog order."""
    functions = {fid: i for i, fid in enumerate(dict.fromkeys(function_order or [f.target for f in findings]))}
    cwes = {name: i for i, name in enumerate(dict.fromkeys(cwe_order or [f.cwe for f in findings if f.cwe]))}
    return sorted(
        findings,
        key=lambda f: (functions.get(f.target, len(functions)), cwes.get(f.cwe or "", -1)),
    )


def build_report(
    findings: Sequence[AuditFinding],
    metadata: dict[str, Any] | None = None,
    function_order: Sequence[str] | None = None,
    cwe_order: Sequence[str] | None = None,
) -> AuditReport:
    """Collect findings of one contract with judgment and category counts.

    Args:
        findings: Findings of a single contract.
        metadata: Generation details stored on the report.
        function_order: FunctionIds in declaration order.
        cwe_order: Catalog names in catalog order.

    Returns:
        The report.

    Raises:
        MixedContractsError: If the findings belong to several contracts.
    """
    contracts = sorted({finding.contract for finding in findings})
    if len(contracts) > 1:
        raise MixedContractsError(
            f"A report covers one contract, the findings name {', '.join(contracts)}"
        )
    ordered = _ordered(findings, function_order, cwe_order)
    judgments = Counter(finding.judgment.value for finding in ordered)
    categories = Counter(category for finding in ordered for category in finding.vuln_types)
    return AuditReport(
        contract=contracts[0] if contracts else "",
        findings=tuple(ordered),
        judgment_counts={j.value: judgments.get(j.value, 0) for j in Judgment},
        category_counts=dict(sorted(categories.items())),
        metadata=dict(metadata or {}),
    )


def findings_frame(findings: Sequence[AuditFinding]) -> pd.DataFrame:
    """Tabulate findings with the fixed CSV columns."""
    rows = [
        [
            f.contract,
            f.target,
            f.mode,
            f.cwe or "",
            f.judgment.value,
            "|".join(f.vuln_types),
            "\n".join(f.locations),
            f.exploitation,
            f.impact,
            f.solutions,
        ]
        for f in findings
    ]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def _markdown(report: AuditReport) -> str:
    lines = [f"# Audit report: {report.contract or '(no findings)'}", ""]
    counts = ", ".join(f"{name}: {count}" for name, count in report.judgment_counts.items())
    lines += [f"Findings: {len(report.findings)} ({counts})", ""]
    current = None
    for finding in report.findings:
        if finding.target != current:
            current = finding.target
            lines += [f"## {finding.target}", ""]
        if finding.cwe:
            lines += [f"### {finding.cwe}", ""]
        lines.append(f"- **Vulnerability:** {finding.judgment.value}")
        if finding.vuln_types:
            lines.append(f"- **Categories:** {', '.join(finding.vuln_types)}")
        if finding.judgment == Judgment.YES:
            lines.append(f"- **Proof of concept:** {finding.exploitation}")
            lines.append(f"- **Business impact:** {finding.impact}")
            lines.append(f"- **Fixes:** {finding.solutions}")
            if finding.locations:
                lines.append("- **Locations:**")
                lines.extend(f"  - `{location}`" for location in finding.locations)
        lines.append("")
    return "\n".join(lines)


def _json(report: AuditReport) -> str:
    document = {
        "contract": report.contract,
        "metadata": report.metadata,
        "judgment_counts": report.judgment_counts,
        "category_counts": report.category_counts,
        "findings": [
            {**asdict(finding), "judgment": finding.judgment.value}
            for finding in report.findings
        ],
    }
    return json.dumps(document, indent=2) + "\n"


def assemble_report(
    findings: Sequence[AuditFinding],
    fmt: ReportFormat = "csv",
    metadata: dict[str, Any] | None = None,
    function_order: Sequence[str] | None = None,
    cwe_order: Sequence[str] | None = None,
) -> str:
    """Render the findings of one contract as a document.

    Args:
        findings: Findings of a single contract.
        fmt: 'csv', 'markdown' or 'json'.
        metadata: Generation details, shown in the JSON document.
        function_order: FunctionIds in declaration order.
        cwe_order: Catalog names in catalog order.

    Returns:
        The document text.

    Raises:
        MixedContractsError: If the findings belong to several contracts.
        ValueError: If the format is unknown.
    """
    report = build_report(findings, metadata, function_order, cwe_order)
    if fmt == "csv":
        buffer = StringIO()
        findings_frame(report.findings).to_csv(buffer, index=False, lineterminator="\n")
        return buffer.getvalue()
    if fmt == "markdown":
        return _markdown(report)
    if fmt == "json":
        return _json(report)
    raise ValueError(f"Unknown report format {fmt!r}, expected 'csv', 'markdown' or 'json'.")


def read_findings_csv(path: str | Path) -> list[AuditFinding]:
    """Read a CSV report back into findings (without raw response text)."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    return [
        AuditFinding(
            target=row.functionId,
            contract=row.contract,
            mode=row.mode,  # type: ignore[arg-type]
            cwe=row.cwe or None,
            judgment=Judgment(row.judgment),
            vuln_types=tuple(row.categories.split("|")) if row.categories else (),
            exploitation=row.exploitation,
            impact=row.impact,
            solutions=row.solutions,
            locations=tuple(row.locations.split("\n")) if row.locations else (),
        )
        for row in frame.itertuples(index=False)
    ]


def write_findings(findings: Sequence[AuditFinding], path: str | Path) -> Path:
    """Write findings, raw text included, as JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for finding in findings:
            handle.write(json.dumps({**asdict(finding), "judgment": finding.judgment.value}) + "\n")
    return path


def read_findings(path: str | Path) -> list[AuditFinding]:
    """Read findings written by :func:`write_findings`."""
    findings = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            record["judgment"] = Judgment(record["judgment"])
            record["vuln_types"] = tuple(record["vuln_types"])
            record["locations"] = tuple(record["locations"])
            findings.append(AuditFinding(**record))
    return findings
