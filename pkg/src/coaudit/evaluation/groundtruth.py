"""Labeled vulnerabilities: reading, importing and resolving to functions.

A ground-truth file is a CSV with the columns ``contract``, ``path``,
``location`` and ``category``. The location is a function name, a full
FunctionId, a line (``42``) or a line range (``40-45``) in ``path``.
"""

import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING
from typing import Any

# Pandas for table management
import pandas as pd

from coaudit.auditing.taxonomy import Taxonomy
from coaudit.errors import UnresolvedGroundTruthError
from coaudit.scoping.ingest import FlattenedSource
from coaudit.scoping.parser import FunctionDef
from coaudit.scoping.parser import ParsedUnit

if TYPE_CHECKING:
    PdSeriesAny = pd.Series[Any]  # type: ignore[misc]
else:
    PdSeriesAny = pd.Series

logger = logging.getLogger(__name__)

GROUND_TRUTH_COLUMNS = ["contract", "path", "location", "category"]

_LINE_RANGE = re.compile(r"^\s*(\d+)\s*(?:-\s*(\d+))?\s*$")
_SMARTBUGS_TAG = re.compile(r"//\s*<yes>\s*<report>\s*([A-Za-z_ -]+)")


@dataclass(frozen=True)
class GroundTruthEntry:
    """One labeled vulnerability.

    Attributes:
        contract: Contract declaring the vulnerable function.
        function_id: FunctionId of the vulnerable function.
        category: Taxonomy category.
        path: Source file the label came from.
        lines: Labeled line range, when the label was line based.
    """

    contract: str
    function_id: str
    category: str
    path: str = ""
    lines: tuple[int, int] | None = None


def _normalize_category(label: str, taxonomy: Taxonomy) -> str:
    name = label.strip().lower().replace("_", " ")
    if name in taxonomy.categories:
        return name
    found = taxonomy.classify(f"{name} {name.replace('-', ' ')}", detected=True)
    return found[0]


def read_ground_truth(path: str | Path, taxonomy: Taxonomy | None = None) -> pd.DataFrame:
    """Read a ground-truth CSV.

    Args:
        path: CSV file with the ground-truth columns.
        taxonomy: Category table; the packaged one when omitted.

    Returns:
        The rows, with categories checked against the taxonomy.

    Raises:
        ValueError: If a column is missing or a category is unknown.
    """
    taxonomy = taxonomy if taxonomy is not None else Taxonomy.load()
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [column for column in GROUND_TRUTH_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"Columns {', '.join(missing)} are not present in {path}!")
    frame["category"] = frame["category"].str.strip().str.lower()
    unknown = sorted(set(frame["category"]) - set(taxonomy.categories))
    if unknown:
        raise ValueError(f"Categories {', '.join(unknown)} are not in the taxonomy!")
    logger.info("Read %s ground-truth record(s) from %s", len(frame), path)
    return frame[GROUND_TRUTH_COLUMNS]


def write_ground_truth(frame: pd.DataFrame, path: str | Path) -> Path:
    """Write ground-truth rows as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame[GROUND_TRUTH_COLUMNS].to_csv(path, index=False, lineterminator="\n")
    return path


def import_smartbugs(
    path: str | Path, root: str | Path | None = None, taxonomy: Taxonomy | None = None
) -> pd.DataFrame:
    """Convert ``// <yes> <report> CATEGORY`` annotations into ground-truth rows.

    The labeled line is the first non-comment line after the annotation.

    Args:
        path: Annotated Solidity file.
        root: Project root; ``path`` is stored relative to it.
        taxonomy: Category table; the packaged one when omitted.

    Returns:
        Rows with an empty contract and a single-line location.
    """
    taxonomy = taxonomy if taxonomy is not None else Taxonomy.load()
    path = Path(path)
    relative = path.relative_to(root).as_posix() if root is not None else path.as_posix()
    lines = path.read_text(encoding="utf-8").splitlines()
    rows = []
    for number, line in enumerate(lines, start=1):
        tag = _SMARTBUGS_TAG.search(line)
        if tag is None:
            continue
        target = next(
            (
                candidate
                for candidate in range(number + 1, len(lines) + 1)
                if lines[candidate - 1].strip()
                and not lines[candidate - 1].strip().startswith("//")
            ),
            None,
        )
        if target is None:
            logger.warning("Annotation on line %s of %s labels no code", number, relative)
            continue
        rows.append(["", relative, str(target), _normalize_category(tag.group(1), taxonomy)])
    logger.info("Imported %s annotation(s) from %s", len(rows), relative)
    return pd.DataFrame(rows, columns=GROUND_TRUTH_COLUMNS)


def import_solidifi(
    log_path: str | Path, contract_path: str, taxonomy: Taxonomy | None = None
) -> pd.DataFrame:
    """Convert a bug-injection log into ground-truth rows.

    Args:
        log_path: CSV with the columns ``loc``, ``length``, ``bug type`` and
            ``approach``.
        contract_path: Project-relative path of the injected contract.
        taxonomy: Category table; the packaged one when omitted.

    Returns:
        Rows with an empty contract and a line-range location.
    """
    taxonomy = taxonomy if taxonomy is not None else Taxonomy.load()
    log = pd.read_csv(log_path, dtype=str, keep_default_na=False)
    log.columns = [column.strip().lower() for column in log.columns]
    first = log["loc"].astype(int)
    last = first + log["length"].astype(int).clip(lower=1) - 1
    frame = pd.DataFrame(
        {
            "contract": "",
            "path": contract_path,
            "location": first.astype(str) + "-" + last.astype(str),
            "category": log["bug type"].map(lambda label: _normalize_category(label, taxonomy)),
        }
    )
    logger.info("Imported %s injected bug(s) for %s", len(frame), contract_path)
    return frame[GROUND_TRUTH_COLUMNS]


def _line_offsets(text: str) -> list[int]:
    return [0] + [match.end() for match in re.finditer("\n", text)]


def _flat_offset(flat: FlattenedSource, path: str, offset: int) -> int | None:
    for span in flat.origin_map:
        if span.path == path and span.src_start <= offset < span.src_end:
            return span.text_start + offset - span.src_start
    return None


def _enclosing(unit: ParsedUnit, offset: int, contract: str) -> FunctionDef | None:
    hits = [
        definition
        for definition in unit.definitions.values()
        if definition.kind != "getter" and definition.span.start <= offset < definition.span.end
    ]
    preferred = [d for d in hits if d.contract == contract] if contract else []
    candidates = preferred or hits
    return max(candidates, key=lambda d: d.span.start) if candidates else None


def _by_lines(
    row: PdSeriesAny,
    first: int,
    last: int,
    unit: ParsedUnit,
    flat: FlattenedSource | None,
    sources: Mapping[str, str] | None,
) -> FunctionDef | None:
    if flat is None:
        text = unit.text
    elif sources is not None and row["path"] in sources:
        text = sources[row["path"]]
    else:
        raise UnresolvedGroundTruthError(f"Source of {row['path']} is not available")
    starts = _line_offsets(text)
    for line in range(first, min(last, len(starts)) + 1):
        start = starts[line - 1]
        end = starts[line] if line < len(starts) else len(text)
        stripped = len(text[start:end]) - len(text[start:end].lstrip())
        offset = start + stripped
        if offset >= end:
            continue
        if flat is not None:
            mapped = _flat_offset(flat, row["path"], offset)
            if mapped is None:
                continue
            offset = mapped
        found = _enclosing(unit, offset, row["contract"])
        if found is not None:
            return found
    return None


def _by_name(row: PdSeriesAny, unit: ParsedUnit) -> FunctionDef | None:
    location = row["location"].strip()
    if location in unit.definitions:
        return unit.definitions[location]
    name, _, arity = location.partition("/")
    contract = row["contract"]
    if "." in name:
        contract, name = name.split(".", 1)
    matches = [
        d
        for d in unit.definitions.values()
        if d.contract == contract and d.name == name and (not arity or str(d.arity) == arity)
    ]
    if len(matches) > 1:
        raise UnresolvedGroundTruthError(
            f"{contract}.{name} is overloaded, give the arity as {contract}.{name}/<n>"
        )
    return matches[0] if matches else None


def resolve_ground_truth(
    frame: pd.DataFrame,
    unit: ParsedUnit,
    flat: FlattenedSource | None = None,
    sources: Mapping[str, str] | None = None,
) -> list[GroundTruthEntry]:
    """Map ground-truth rows to FunctionIds of a parsed unit.

    Args:
        frame: Rows with the ground-truth columns.
        unit: The parsed flattened source.
        flat: The flattened source; line numbers then refer to ``path``.
            Without it line numbers refer to ``unit.text``.
        sources: Original file contents by path, needed for line numbers
            when ``flat`` is given.

    Returns:
        One entry per row, in row order.

    Raises:
        UnresolvedGroundTruthError: If a row maps to no function.
    """
    entries = []
    for _, row in frame.iterrows():
        lines_match = _LINE_RANGE.match(row["location"])
        lines = None
        if lines_match:
            first = int(lines_match.group(1))
            last = int(lines_match.group(2) or first)
            lines = (first, last)
            definition = _by_lines(row, first, last, unit, flat, sources)
        else:
            definition = _by_name(row, unit)
        if definition is None:
            raise UnresolvedGroundTruthError(
                f"Location '{row['location']}' in {row['path'] or row['contract']} maps to no function"
            )
        entries.append(
            GroundTruthEntry(
                contract=definition.contract,
                function_id=definition.id,
                category=row["category"],
                path=row["path"],
                lines=lines,
            )
        )
    logger.info("Resolved %s ground-truth record(s)", len(entries))
    return entries


def ground_truth_counts(entries: list[GroundTruthEntry], categories: tuple[str, ...]) -> dict[str, int]:
    """Count labeled vulnerabilities per category, in taxonomy order."""
    counts = pd.Series([entry.category for entry in entries], dtype=str).value_counts()
    return {category: int(counts.get(category, 0)) for category in categories}
