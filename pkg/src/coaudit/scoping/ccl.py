"""Code Call Lists: the verbatim code a function needs for a focused audit.

A CCL holds the target function followed by every definition reachable from
it in the call graph, each exactly once, trimmed to a token budget.
"""

import json
import logging
from collections import deque
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Literal

from coaudit.errors import BudgetTooSmallError
from coaudit.errors import CoAuditError
from coaudit.errors import UnknownContractError
from coaudit.errors import UnknownFunctionError
from coaudit.scoping.callgraph import CallGraph
from coaudit.scoping.ingest import FlattenedSource
from coaudit.scoping.parser import ParsedUnit
from coaudit.scoping.parser import parse

logger = logging.getLogger(__name__)

SegmentRole = Literal["target", "modifier", "constructor", "callee"]

DEFAULT_BUDGET = 7000


@dataclass(frozen=True)
class CodeSegment:
    """Verbatim code of one definition inside a CCL."""

    function_id: str
    code: str
    role: SegmentRole
    depth: int


@dataclass(frozen=True)
class CodeCallList:
    """The code context of one target function.

    Attributes:
        target: FunctionId under audit.
        segments: Target first, then its reachable definitions.
        token_estimate: Sum of the segment estimates.
        truncated: Whether definitions were dropped to fit the budget.
        omitted: FunctionIds dropped for the budget.
        state_context: State variable declarations of the target's contract,
            when requested.
    """

    target: str
    segments: tuple[CodeSegment, ...]
    token_estimate: int
    truncated: bool = False
    omitted: tuple[str, ...] = ()
    state_context: str | None = None

    @property
    def code(self) -> str:
        """Segments joined by blank lines, after the state context if any."""
        parts = [self.state_context] if self.state_context else []
        parts.extend(segment.code for segment in self.segments)
        return "\n\n".join(parts)


@dataclass(frozen=True)
class CclBatch:
    """CCLs of a contract keyed by FunctionId, with per-function failures."""

    ccls: dict[str, CodeCallList] = field(default_factory=dict)
    diagnostics: dict[str, str] = field(default_factory=dict)


def estimate_tokens(text: str) -> int:
    """Estimate tokens as whitespace-delimited words times 1.33, rounded up."""
    words = len(text.split())
    return -(-words * 133 // 100)


def _text(source: FlattenedSource | str) -> str:
    return source if isinstance(source, str) else source.text


def _unit(graph: CallGraph, source: FlattenedSource | str) -> ParsedUnit:
    if graph.unit is not None and graph.unit.text == _text(source):
        return graph.unit
    return parse(source)


def extract_code(
    fn: str, source: FlattenedSource | str, unit: ParsedUnit | None = None
) -> str:
    """Return the verbatim code of a definition, leading comments included.

    Args:
        fn: FunctionId.
        source: The flattened source the unit was parsed from.
        unit: Parsed unit; parsed from ``source`` when omitted.

    Returns:
        The declaration text. Bodiless declarations end with ';'.

    Raises:
        UnknownFunctionError: If no definition has that id.
    """
    text = _text(source)
    unit = unit if unit is not None else parse(text)
    return unit.function(fn).span.text(text)


def _role(kind: str, is_target: bool) -> SegmentRole:
    if is_target:
        return "target"
    if kind in ("modifier", "constructor"):
        return kind  # type: ignore[return-value]
    return "callee"


def _segment_order(graph: CallGraph, unit: ParsedUnit, target: str) -> list[str]:
    """Target, its constructor then modifier dependencies, then DFS pre-order."""
    children = {
        node: list(dict.fromkeys(edge.callee for edge in edges))
        for node, edges in graph.adjacency.items()
    }

    def kind(node: str) -> str:
        definition = unit.definitions.get(node)
        return definition.kind if definition is not None else "function"

    direct = [child for child in children.get(target, []) if child != target]
    constructors = [child for child in direct if kind(child) == "constructor"]
    modifiers = [child for child in direct if kind(child) == "modifier"]
    others = [child for child in direct if child not in constructors and child not in modifiers]

    order = [target, *constructors, *modifiers]
    visited = set(order)

    def visit(node: str) -> None:
        # Explicit stack keeps deep call chains off the interpreter stack
        stack = [iter(children.get(node, []))]
        while stack:
            child = next(stack[-1], None)
            if child is None:
                stack.pop()
            elif child not in visited:
                visited.add(child)
                order.append(child)
                stack.append(iter(children.get(child, [])))

    for seed in constructors + modifiers:
        visit(seed)
    for seed in others:
        if seed not in visited:
            visited.add(seed)
            order.append(seed)
            visit(seed)
    return order


def _depths(graph: CallGraph, target: str) -> dict[str, int]:
    """Shortest hop distance from the target."""
    depths = {target: 0}
    queue = deque([target])
    while queue:
        node = queue.popleft()
        for edge in graph.adjacency.get(node, ()):
            if edge.callee not in depths:
                depths[edge.callee] = depths[node] + 1
                queue.append(edge.callee)
    return depths


def generate_ccl(
    graph: CallGraph,
    source: FlattenedSource | str,
    target: str,
    budget: int = DEFAULT_BUDGET,
    include_state_vars: bool = False,
) -> CodeCallList:
    """Build the Code Call List of one function.

    When the segments do not fit in the budget, the deepest definitions are
    dropped first (later position first at equal depth) until they fit.

    Args:
        graph: Call graph of the unit.
        source: The flattened source.
        target: FunctionId to audit.
        budget: Maximum token estimate of the segments.
        include_state_vars: Carry the state variable declarations of the
            target's contract as ``state_context``.

    Returns:
        The CCL.

    Raises:
        UnknownFunctionError: If the target is not a node of the graph.
        BudgetTooSmallError: If the target alone exceeds the budget.
    """
    if target not in graph.adjacency:
        raise UnknownFunctionError(f"Function {target} is not a node of the call graph")
    unit = _unit(graph, source)
    text = _text(source)

    depths = _depths(graph, target)
    segments = []
    for node in _segment_order(graph, unit, target):
        definition = unit.function(node)
        segments.append(
            CodeSegment(
                function_id=node,
                code=definition.span.text(text),
                role=_role(definition.kind, node == target),
                depth=depths[node],
            )
        )

    estimates = [estimate_tokens(segment.code) for segment in segments]
    if estimates[0] > budget:
        raise BudgetTooSmallError(
            f"Function {target} needs about {estimates[0]} tokens, more than the budget of {budget}"
        )

    # Drop deepest first, later position first among equals
    kept = list(range(len(segments)))
    omitted: list[str] = []
    total = sum(estimates)
    drop_order = sorted(kept[1:], key=lambda i: (segments[i].depth, i), reverse=True)
    for index in drop_order:
        if total <= budget:
            break
        kept.remove(index)
        omitted.append(segments[index].function_id)
        total -= estimates[index]
    if omitted:
        logger.warning(
            "CCL of %s exceeds %s tokens; omitted %s definition(s)", target, budget, len(omitted)
        )

    state_context = None
    if include_state_vars:
        contract = unit.contract(unit.function(target).contract)
        if contract.state_var_span is not None:
            state_context = contract.state_var_span.text(text)

    return CodeCallList(
        target=target,
        segments=tuple(segments[i] for i in kept),
        token_estimate=total,
        truncated=bool(omitted),
        omitted=tuple(omitted),
        state_context=state_context,
    )


def main_contract(
    unit: ParsedUnit, source: FlattenedSource | str, name: str | None = None
) -> str:
    """Find the contract under audit.

    Args:
        unit: The parsed unit.
        source: The flattened source; its entry file region is searched.
        name: Explicit contract name, validated when given.

    Returns:
        The contract name: the last contract (not interface or library)
        declared in the entry file.

    Raises:
        UnknownContractError: If no contract qualifies.
    """
    if name is not None:
        return unit.contract(name).name
    candidates = [c for c in unit.contracts if c.kind in ("contract", "abstract")]
    if isinstance(source, FlattenedSource) and source.included_files:
        entry = source.included_files[-1]
        regions = [(s.text_start, s.text_end) for s in source.origin_map if s.path == entry]
        in_entry = [
            c for c in candidates if any(a <= c.span.start < b for a, b in regions)
        ]
        candidates = in_entry or candidates
    if not candidates:
        raise UnknownContractError("The source declares no contract to audit")
    return candidates[-1].name


def generate_all_ccls(
    graph: CallGraph,
    source: FlattenedSource | str,
    budget: int = DEFAULT_BUDGET,
    contract: str | None = None,
    include_state_vars: bool = False,
) -> CclBatch:
    """Build one CCL per implemented function of the main contract.

    Per-function errors are collected in ``diagnostics``; the batch goes on.

    Args:
        graph: Call graph of the unit.
        source: The flattened source.
        budget: Token budget per CCL.
        contract: Contract name; see :func:`main_contract` when omitted.
        include_state_vars: Forwarded to :func:`generate_ccl`.

    Returns:
        CCLs in declaration order and the diagnostics of failed functions.
    """
    unit = _unit(graph, source)
    name = main_contract(unit, source, contract)
    batch = CclBatch()
    for definition in unit.members(name):
        if definition.kind in ("modifier", "getter") or not definition.body_present:
            continue
        try:
            batch.ccls[definition.id] = generate_ccl(
                graph, source, definition.id, budget, include_state_vars
            )
        except CoAuditError as err:
            logger.warning("No CCL for %s: %s", definition.id, err)
            batch.diagnostics[definition.id] = str(err)
    logger.info("Generated %s CCL(s) for contract %s", len(batch.ccls), name)
    return batch


def write_ccls(ccls: dict[str, CodeCallList], path: str | Path) -> Path:
    """Write CCLs as JSON lines, one record per CCL.

    Args:
        ccls: CCLs keyed by FunctionId.
        path: Target file.

    Returns:
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for ccl in ccls.values():
            record = {
                "target": ccl.target,
                "truncated": ccl.truncated,
                "token_estimate": ccl.token_estimate,
                "omitted": list(ccl.omitted),
                "state_context": ccl.state_context,
                "segments": [
                    {
                        "function_id": s.function_id,
                        "role": s.role,
                        "depth": s.depth,
                        "code": s.code,
                    }
                    for s in ccl.segments
                ],
            }
            handle.write(json.dumps(record) + "\n")
    return path


def read_ccls(path: str | Path) -> dict[str, CodeCallList]:
    """Read CCLs written by :func:`write_ccls`."""
    ccls = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            ccls[record["target"]] = CodeCallList(
                target=record["target"],
                segments=tuple(CodeSegment(**segment) for segment in record["segments"]),
                token_estimate=record["token_estimate"],
                truncated=record["truncated"],
                omitted=tuple(record["omitted"]),
                state_context=record.get("state_context"),
            )
    return ccls
