"""Load a Solidity project from disk and flatten it into one source unit."""

import bisect
import logging
import os
import posixpath
import re
from collections import deque
from collections.abc import Callable
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

# Pandas for the origin-map sidecar
import pandas as pd

from coaudit.errors import DuplicateContractError
from coaudit.errors import MissingEntryError
from coaudit.errors import UnreadableFileError
from coaudit.errors import UnresolvedImportError
from coaudit.scoping.lexing import CONTRACT_HEADER
from coaudit.scoping.lexing import IMPORT_STATEMENT
from coaudit.scoping.lexing import PRAGMA_STATEMENT
from coaudit.scoping.lexing import LexedText
from coaudit.scoping.lexing import lex

logger = logging.getLogger(__name__)

SourceKind = Literal["local", "dependency"]

_QUOTED = re.compile(r"[\"']([^\"']*)[\"']")
_SPDX = "SPDX-License-Identifier"
ORIGIN_COLUMNS = ["text_start", "text_end", "path", "src_start", "src_end"]


@dataclass(frozen=True)
class SourceFile:
    """One Solidity file of a project.

    Attributes:
        path: Project-relative POSIX path.
        content: UTF-8 text of the file.
        kind: 'dependency' when reached through a remapping or node_modules.
    """

    path: str
    content: str
    kind: SourceKind = "local"


@dataclass(frozen=True)
class Project:
    """A Solidity project closed under the imports of its entry file.

    Attributes:
        root: Project root directory.
        files: Files by project-relative path, in discovery order.
        remappings: (prefix, root-relative directory) import rewrites.
        entry: Path of the main contract file.
        imports: Resolved import targets of every file, in source order.
    """

    root: Path
    files: Mapping[str, SourceFile]
    remappings: tuple[tuple[str, str], ...]
    entry: str
    imports: Mapping[str, tuple[str, ...]]


@dataclass(frozen=True)
class OriginSpan:
    """Maps ``text[text_start:text_end]`` to ``path[src_start:src_end]``."""

    text_start: int
    text_end: int
    path: str
    src_start: int
    src_end: int


@dataclass(frozen=True)
class FlattenedSource:
    """Consolidated source of a project.

    Attributes:
        text: The flattened Solidity text.
        origin_map: Contiguous spans covering ``text`` in order.
        included_files: Paths in emission order (dependencies first).
    """

    text: str
    origin_map: tuple[OriginSpan, ...]
    included_files: tuple[str, ...]


def read_remappings(path: str | Path) -> dict[str, str]:
    """Read a remappings file with one ``prefix=dir`` per line.

    Args:
        path: Path of the remappings file.

    Returns:
        Mapping from import prefix to directory.

    Raises:
        ValueError: If a non-empty line has no '=' separator.
    """
    remappings = {}
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"Remapping on line {number} is not 'prefix=dir': {line}")
        prefix, directory = line.split("=", 1)
        remappings[prefix.strip()] = directory.strip()
    return remappings


def import_strings(content: str) -> list[str]:
    """List the import paths of a Solidity source in source order.

    Args:
        content: Solidity source code.

    Returns:
        The quoted path of each import statement.
    """
    lexed = lex(content)
    specs = []
    for match in IMPORT_STATEMENT.finditer(lexed.code):
        quoted = _QUOTED.search(content, match.start(), match.end())
        if quoted is not None:
            specs.append(quoted.group(1))
    return specs


def _normalize_remappings(
    root: Path, remappings: Mapping[str, str] | None
) -> tuple[tuple[str, str], ...]:
    if not remappings:
        return ()
    normalized = []
    for prefix, directory in remappings.items():
        directory_path = Path(directory)
        if directory_path.is_absolute():
            directory = os.path.relpath(directory_path, root)
        normalized.append((prefix, Path(directory).as_posix()))
    # Longest prefix wins
    return tuple(sorted(normalized, key=lambda item: (-len(item[0]), item[0])))


def _candidates(
    spec: str, importer: str, remappings: tuple[tuple[str, str], ...]
) -> list[tuple[str, bool | None]]:
    """Candidate project paths for an import, with their dependency flag.

    A flag of None means the target inherits the importer's kind.
    """
    if spec.startswith(("./", "../")):
        joined = posixpath.join(posixpath.dirname(importer), spec)
        return [(posixpath.normpath(joined), None)]
    candidates: list[tuple[str, bool | None]] = []
    for prefix, directory in remappings:
        if spec.startswith(prefix):
            remapped = posixpath.join(directory, spec[len(prefix) :])
            candidates.append((posixpath.normpath(remapped), True))
            break
    candidates.append((posixpath.normpath(spec), False))
    candidates.append((posixpath.normpath(posixpath.join("node_modules", spec)), True))
    return candidates


def _resolve(
    spec: str,
    importer: str,
    remappings: tuple[tuple[str, str], ...],
    exists: Callable[[str], bool],
) -> tuple[str, bool | None] | None:
    for candidate, dependency in _candidates(spec, importer, remappings):
        if exists(candidate):
            return candidate, dependency
    return None


def _read(root: Path, path: str) -> str:
    try:
        with open(root / path, encoding="utf-8", newline="") as handle:
            return handle.read()
    except (OSError, UnicodeDecodeError) as err:
        raise UnreadableFileError(f"Could not read {path}: {err}") from err


def load_project(
    root: str | Path, entry: str, remappings: Mapping[str, str] | None = None
) -> Project:
    """Load every Solidity file reachable from ``entry`` through imports.

    Args:
        root: Project root directory.
        entry: Path of the main contract file, relative to root (or an
            import string resolvable through the remappings).
        remappings: Import prefix rewrites, e.g.
            ``{"@openzeppelin/": "lib/openzeppelin-contracts/"}``.

    Returns:
        The project, transitively closed over imports.

    Raises:
        MissingEntryError: If the entry file does not exist.
        UnresolvedImportError: If an import matches no file.
    """
    root = Path(root)
    remaps = _normalize_remappings(root, remappings)

    def exists(candidate: str) -> bool:
        return (root / candidate).is_file()

    resolved_entry = _resolve(entry, "", remaps, exists)
    if resolved_entry is None:
        raise MissingEntryError(f"Entry file {entry} not found under {root}")
    entry_path = resolved_entry[0]

    # Breadth-first walk over the import graph
    files: dict[str, SourceFile] = {}
    imports: dict[str, tuple[str, ...]] = {}
    queue: deque[tuple[str, SourceKind]] = deque([(entry_path, "local")])
    while queue:
        path, kind = queue.popleft()
        if path in files:
            continue
        content = _read(root, path)
        files[path] = SourceFile(path=path, content=content, kind=kind)
        targets = []
        for spec in import_strings(content):
            target = _resolve(spec, path, remaps, exists)
            if target is None:
                raise UnresolvedImportError(
                    f"Import '{spec}' in {path} matches no file or remapping"
                )
            target_path, dependency = target
            if dependency is None:
                target_kind = kind
            else:
                target_kind = "dependency" if dependency else "local"
            targets.append(target_path)
            queue.append((target_path, target_kind))
        imports[path] = tuple(targets)

    logger.info("Loaded %s file(s) reachable from %s", len(files), entry_path)
    return Project(
        root=root, files=files, remappings=remaps, entry=entry_path, imports=imports
    )


def _import_graph(project: Project) -> dict[str, list[str]]:
    """Re-resolve every import against the project's own file set."""
    graph = {}
    for path, source in project.files.items():
        targets = []
        for spec in import_strings(source.content):
            target = _resolve(spec, path, project.remappings, project.files.__contains__)
            if target is None:
                raise UnresolvedImportError(
                    f"Import '{spec}' in {path} matches no file or remapping"
                )
            targets.append(target[0])
        graph[path] = targets
    return graph


def _dependency_order(entry: str, graph: Mapping[str, list[str]]) -> list[str]:
    """Post-order DFS from the entry: dependencies first, ties lexicographic.

    A back edge to a file still on the DFS stack is skipped, which breaks
    import cycles by first-visit order.
    """
    order: list[str] = []
    visited: set[str] = set()

    def visit(path: str) -> None:
        visited.add(path)
        for dependency in sorted(set(graph[path])):
            if dependency not in visited:
                visit(dependency)
        order.append(path)

    visit(entry)
    return order


def _statement_span(content: str, start: int, end: int) -> tuple[int, int]:
    """Widen a statement span to its whole line when it stands alone."""
    line_start = content.rfind("\n", 0, start) + 1
    if not content[line_start:start].strip():
        start = line_start
    while end < len(content) and content[end] in " \t\r":
        end += 1
    if end < len(content) and content[end] == "\n":
        end += 1
    return start, end


def _header_spans(content: str, lexed: LexedText) -> list[tuple[int, int]]:
    """Pragma directives and SPDX license lines of a file."""
    spans = [
        _statement_span(content, m.start(), m.end()) for m in PRAGMA_STATEMENT.finditer(lexed.code)
    ]
    spans.extend(
        _statement_span(content, start, end)
        for start, end in lexed.comments
        if _SPDX in content[start:end]
    )
    return sorted(spans)


def _kept_spans(content: str) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Split a file into its header lines and the code that follows them.

    Import statements are dropped from both.
    """
    lexed = lex(content)
    header = _header_spans(content, lexed)
    removed = header + [
        _statement_span(content, m.start(), m.end())
        for m in IMPORT_STATEMENT.finditer(lexed.code)
    ]
    kept = []
    cursor = 0
    for start, end in sorted(removed):
        if start > cursor:
            kept.append((cursor, start))
        cursor = max(cursor, end)
    if cursor < len(content):
        kept.append((cursor, len(content)))
    return header, kept


def _check_duplicate_contracts(project: Project, order: list[str]) -> None:
    declared: dict[str, str] = {}
    for path in order:
        code = lex(project.files[path].content).code
        for match in CONTRACT_HEADER.finditer(code):
            name = match.group("name")
            if name in declared:
                raise DuplicateContractError(
                    f"Contract {name} is declared in both {declared[name]} and {path}"
                )
            declared[name] = path


def flatten(project: Project) -> FlattenedSource:
    """Merge the project into one standalone source text.

    The pragma directives and SPDX license lines of the entry file come first,
    then the files in dependency order. Import statements are removed from
    every file, as are the pragma and license lines of dependencies. Comments
    are otherwise preserved verbatim.

    Args:
        project: A loaded project.

    Returns:
        The flattened source and its origin map.

    Raises:
        UnresolvedImportError: If an import matches no file of the project.
        DuplicateContractError: If two files declare the same contract name.
    """
    graph = _import_graph(project)
    order = _dependency_order(project.entry, graph)
    _check_duplicate_contracts(project, order)

    pieces: list[str] = []
    origins: list[OriginSpan] = []
    cursor = 0

    def emit(path: str, start: int, end: int) -> None:
        nonlocal cursor
        pieces.append(project.files[path].content[start:end])
        origins.append(OriginSpan(cursor, cursor + end - start, path, start, end))
        cursor += end - start

    def separate(path: str) -> None:
        # Keep consecutive files on separate lines
        nonlocal cursor
        if pieces and not pieces[-1].endswith("\n"):
            length = len(project.files[path].content)
            pieces.append("\n")
            origins.append(OriginSpan(cursor, cursor + 1, path, length, length))
            cursor += 1

    entry_header, _ = _kept_spans(project.files[project.entry].content)
    for start, end in entry_header:
        emit(project.entry, start, end)
    if entry_header:
        separate(project.entry)
    for index, path in enumerate(order):
        _, body = _kept_spans(project.files[path].content)
        for start, end in body:
            emit(path, start, end)
        if index < len(order) - 1:
            separate(path)

    logger.info("Flattened %s file(s) into %s characters", len(order), cursor)
    return FlattenedSource(
        text="".join(pieces), origin_map=tuple(origins), included_files=tuple(order)
    )


def origin_of(source: FlattenedSource, offset: int) -> tuple[str, int]:
    """Map an offset of the flattened text back to its source file.

    Args:
        source: The flattened source.
        offset: Offset into ``source.text``.

    Returns:
        (path, offset in that file).

    Raises:
        ValueError: If the offset lies outside the text.
    """
    if not 0 <= offset < len(source.text):
        raise ValueError(f"Offset {offset} is outside the flattened text")
    starts = [span.text_start for span in source.origin_map]
    span = source.origin_map[bisect.bisect_right(starts, offset) - 1]
    return span.path, span.src_start + offset - span.text_start


def write_flattened(source: FlattenedSource, path: str | Path) -> Path:
    """Write the flattened text and its ``.origins.csv`` sidecar.

    Args:
        source: The flattened source.
        path: Target ``.sol`` path.

    Returns:
        Path of the written Solidity file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(source.text, encoding="utf-8", newline="")
    origins = pd.DataFrame(
        [
            [s.text_start, s.text_end, s.path, s.src_start, s.src_end]
            for s in source.origin_map
        ],
        columns=ORIGIN_COLUMNS,
    )
    origins.to_csv(origin_sidecar(path), index=False, lineterminator="\n")
    return path


def origin_sidecar(path: str | Path) -> Path:
    """Return the origin-map sidecar path of a flattened file."""
    path = Path(path)
    return path.with_name(f"{path.stem}.origins.csv")


def read_flattened(path: str | Path) -> FlattenedSource:
    """Read a flattened file written by :func:`write_flattened`.

    Args:
        path: Path of the flattened ``.sol`` file.

    Returns:
        The flattened source with its origin map.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as handle:
        text = handle.read()
    origins = pd.read_csv(origin_sidecar(path), dtype={"path": str})
    origin_map = tuple(
        OriginSpan(
            int(row.text_start),
            int(row.text_end),
            str(row.path),
            int(row.src_start),
            int(row.src_end),
        )
        for row in origins.itertuples(index=False)
    )
    included = tuple(dict.fromkeys(span.path for span in origin_map))
    return FlattenedSource(text=text, origin_map=origin_map, included_files=included)
