"""Function call graph over a parsed unit.

Every call site of the unit is resolved to a declared function, getter,
modifier or constructor, or recorded as unresolved with a reason. Receiver
types are recovered syntactically from parameters, locals, state variables,
casts and the return types of chained calls.
"""

import logging
import re
from collections.abc import Iterable
from collections.abc import Mapping
from dataclasses import dataclass
from dataclasses import field
from functools import cached_property
from pathlib import Path
from typing import Literal

# Graph storage, traversal and DOT export
import networkx as nx

from coaudit.errors import UnknownFunctionError
from coaudit.scoping.lexing import IDENTIFIER
from coaudit.scoping.parser import CallSite
from coaudit.scoping.parser import FunctionDef
from coaudit.scoping.parser import ParsedUnit
from coaudit.scoping.parser import SourceSpan

logger = logging.getLogger(__name__)

EdgeKind = Literal["internal", "external", "modifier", "constructor"]
Resolution = Literal["exact", "most-derived", "ambiguous"]

_ADJACENCY_LINE = re.compile(r"^(?P<caller>\S+)\s*->\s*(?P<callee>\S+)\s*\[(?P<kind>[\w-]+),(?P<resolution>[\w-]+)\]$")
_CAST = re.compile(rf"^(?P<name>{IDENTIFIER})\s*\((?P<inner>.*)\)$", re.DOTALL)
_INDEXED = re.compile(rf"^(?P<name>{IDENTIFIER})\s*(?P<index>\[.*\])$", re.DOTALL)
_CALLABLE_KINDS = ("function", "getter", "fallback", "receive")


@dataclass(frozen=True)
class CallEdge:
    """A resolved call from one definition to another.

    Attributes:
        caller: Calling FunctionId.
        callee: Called FunctionId.
        kind: internal, external, modifier or constructor.
        resolution: exact, most-derived or ambiguous.
        site: Span of the call site, None for edges reloaded from text.
        candidates: Every candidate id when the resolution is ambiguous.
    """

    caller: str
    callee: str
    kind: EdgeKind
    resolution: Resolution = "exact"
    site: SourceSpan | None = None
    candidates: tuple[str, ...] = ()


@dataclass(frozen=True)
class CallGraph:
    """Function call graph.

    Attributes:
        nodes: FunctionIds in source order.
        adjacency: Outgoing edges per caller, in call-site order.
        unresolved: Call sites without a target, with the reason.
        unit: The parsed unit the graph was built from, if any.
    """

    nodes: tuple[str, ...]
    adjacency: Mapping[str, tuple[CallEdge, ...]]
    unresolved: tuple[tuple[CallSite, str], ...] = ()
    unit: ParsedUnit | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[CallEdge]) -> "CallGraph":
        """Build a graph from a node list and edges in caller order."""
        node_list = tuple(dict.fromkeys(nodes))
        adjacency: dict[str, list[CallEdge]] = {node: [] for node in node_list}
        for edge in edges:
            for end in (edge.caller, edge.callee):
                if end not in adjacency:
                    raise ValueError(f"Edge endpoint {end} is not a node of the graph.")
            adjacency[edge.caller].append(edge)
        return cls(nodes=node_list, adjacency={k: tuple(v) for k, v in adjacency.items()})

    def edges(self) -> list[CallEdge]:
        """All edges, grouped by caller in node order."""
        return [edge for node in self.nodes for edge in self.adjacency.get(node, ())]

    @cached_property
    def digraph(self) -> nx.MultiDiGraph:
        """The graph as a networkx multigraph, edges keyed in call order."""
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.nodes)
        for edge in self.edges():
            graph.add_edge(
                edge.caller, edge.callee, kind=edge.kind, resolution=edge.resolution
            )
        return graph


def reachable_set(graph: CallGraph, target: str) -> list[str]:
    """List every node reachable from ``target`` in DFS pre-order.

    Children are visited in call-site order; each node appears once and the
    target itself is excluded.

    Args:
        graph: The call graph.
        target: FunctionId to start from.

    Returns:
        Reachable FunctionIds.

    Raises:
        UnknownFunctionError: If the target is not a node.
    """
    if target not in graph.adjacency:
        raise UnknownFunctionError(f"Function {target} is not a node of the call graph")
    return [node for node in nx.dfs_preorder_nodes(graph.digraph, target) if node != target]


def build_fcg(unit: ParsedUnit) -> CallGraph:
    """Resolve every call site of a parsed unit.

    Args:
        unit: The parsed unit.

    Returns:
        The call graph; call sites that cannot be resolved are listed in
        ``unresolved`` instead of aborting.
    """
    resolver = _Resolver(unit)
    nodes = tuple(unit.definitions)
    adjacency: dict[str, list[CallEdge]] = {node: [] for node in nodes}
    unresolved: list[tuple[CallSite, str]] = []
    for site in unit.call_sites:
        edges, reason = resolver.resolve(site)
        adjacency[site.caller].extend(edges)
        if reason is not None:
            logger.debug("Unresolved call %s in %s: %s", site.callee_name, site.caller, reason)
            unresolved.append((site, reason))

    edge_count = sum(len(edges) for edges in adjacency.values())
    logger.info(
        "Built call graph with %s node(s), %s edge(s), %s unresolved call site(s)",
        len(nodes),
        edge_count,
        len(unresolved),
    )
    return CallGraph(
        nodes=nodes,
        adjacency={node: tuple(edges) for node, edges in adjacency.items()},
        unresolved=tuple(unresolved),
        unit=unit,
    )


def _strip_type(type_name: str | None) -> str | None:
    if not type_name:
        return None
    type_name = type_name.replace("payable", "").strip()
    return type_name.split(".")[-1] if type_name else None


def _last_top_level_dot(expression: str) -> int:
    depth = 0
    for index in range(len(expression) - 1, -1, -1):
        char = expression[index]
        if char in ")]":
            depth += 1
        elif char in "([":
            depth -= 1
        elif char == "." and depth == 0:
            return index
    return -1


class _Resolver:
    """Name and type lookups over one parsed unit."""

    def __init__(self, unit: ParsedUnit) -> None:
        self.unit = unit
        self.contracts = unit.contracts_by_name
        self.order = {name: index for index, name in enumerate(self.contracts)}
        self.members: dict[str, list[FunctionDef]] = {name: [] for name in self.contracts}
        for definition in unit.definitions.values():
            self.members.setdefault(definition.contract, []).append(definition)

    # Hierarchy

    def hierarchy(self, contract: str) -> list[str]:
        """The contract followed by its bases, nearest (rightmost) first."""
        found = []
        pending = [contract]
        while pending:
            name = pending.pop(0)
            if name in found or name not in self.contracts:
                continue
            found.append(name)
            pending.extend(reversed(self.contracts[name].bases))
        return found

    def depth(self, contract: str, seen: frozenset[str] = frozenset()) -> int:
        """Length of the longest base chain above a contract."""
        seen = seen | {contract}
        bases = [b for b in self.contracts[contract].bases if b in self.contracts and b not in seen]
        return 1 + max((self.depth(base, seen) for base in bases), default=0)

    def derives_from(self, contract: str, base: str) -> bool:
        return base in self.hierarchy(contract)

    def matching(self, contract: str, name: str, arity: int, kinds: Iterable[str]) -> list[FunctionDef]:
        kinds = tuple(kinds)
        return [
            d
            for d in self.members.get(contract, [])
            if d.name == name and d.arity == arity and d.kind in kinds
        ]

    def lookup(
        self, contract: str, name: str, arity: int, kinds: Iterable[str], skip_self: bool = False
    ) -> list[FunctionDef]:
        """Definitions in the nearest contract of the hierarchy that has any."""
        kinds = tuple(kinds)
        for index, ancestor in enumerate(self.hierarchy(contract)):
            if skip_self and index == 0:
                continue
            found = self.matching(ancestor, name, arity, kinds)
            if found:
                return found
        return []

    def constructor_of(self, contract: str | None) -> FunctionDef | None:
        if contract is None:
            return None
        constructors = [d for d in self.members.get(contract, []) if d.kind == "constructor"]
        return constructors[0] if constructors else None

    # Selection among candidates

    def choose(self, candidates: list[FunctionDef]) -> tuple[FunctionDef, Resolution, tuple[str, ...]]:
        """Pick the most-derived candidate, ties broken by latest declaration."""
        if len(candidates) == 1:
            return candidates[0], "exact", ()
        ranked = sorted(
            candidates,
            key=lambda d: (self.depth(d.contract), self.order.get(d.contract, 0), d.span.start),
        )
        chosen = ranked[-1]
        related = all(
            self.derives_from(chosen.contract, other.contract) for other in ranked
        ) and len({d.contract for d in ranked}) == len(ranked)
        resolution: Resolution = "most-derived" if related else "ambiguous"
        candidate_ids = tuple(d.id for d in candidates) if resolution == "ambiguous" else ()
        return chosen, resolution, candidate_ids

    def implementations(self, declared: list[FunctionDef], receiver_type: str) -> list[FunctionDef]:
        """Candidates for a call through a variable of ``receiver_type``.

        Bodies in contracts derived from the receiver type count as
        overriding implementations.
        """
        first = declared[0]
        found = [d for d in declared if d.body_present or d.kind == "getter"]
        for contract in self.contracts:
            if contract == receiver_type or not self.derives_from(contract, receiver_type):
                continue
            for definition in self.matching(contract, first.name, first.arity, _CALLABLE_KINDS):
                if definition.body_present or definition.kind == "getter":
                    found.append(definition)
        return found or declared

    # Receiver typing

    def variable_type(self, name: str, caller: FunctionDef) -> tuple[str, int] | None:
        """Declared type of a variable visible to the caller, with its key count."""
        for variable, type_name in reversed(caller.variables):
            if variable == name:
                return type_name, type_name.count("[")
        for contract in self.hierarchy(caller.contract):
            for state in self.contracts[contract].state_vars:
                if state.name == name:
                    return state.type_name, state.key_count
        return None

    def type_of(self, expression: str, caller: FunctionDef) -> str | None:
        """Recover the static type of a receiver expression, if possible."""
        expression = expression.strip()
        if expression == "this":
            return caller.contract
        if re.fullmatch(IDENTIFIER, expression):
            if expression in self.contracts:
                return expression
            found = self.variable_type(expression, caller)
            return _strip_type(found[0]) if found else None

        dot = _last_top_level_dot(expression)
        if dot > 0:
            receiver = expression[:dot]
            member = expression[dot + 1 :].strip()
            call = _CAST.match(member)
            member_name = call.group("name") if call else member
            receiver_type = self.type_of(receiver, caller)
            if receiver_type is None:
                return None
            for ancestor in self.hierarchy(receiver_type):
                for definition in self.members.get(ancestor, []):
                    if definition.name == member_name and definition.returns:
                        return _strip_type(definition.returns[0])
            return None

        cast = _CAST.match(expression)
        if cast:
            name = cast.group("name")
            if name in self.contracts:
                return name
            if name in ("address", "payable"):
                return "address"
            # Call of an own function: use its return type
            for ancestor in self.hierarchy(caller.contract):
                for definition in self.members.get(ancestor, []):
                    if definition.name == name and definition.returns:
                        return _strip_type(definition.returns[0])
            return None

        indexed = _INDEXED.match(expression)
        if indexed:
            found = self.variable_type(indexed.group("name"), caller)
            if found is None:
                return None
            type_name, _ = found
            for contract in self.hierarchy(caller.contract):
                for state in self.contracts[contract].state_vars:
                    if state.name == indexed.group("name"):
                        return _strip_type(state.value_type)
            return _strip_type(re.sub(r"\[[^\]]*\]", "", type_name))
        return None

    def library_functions(self, caller: FunctionDef, receiver_type: str, name: str, arity: int) -> list[FunctionDef]:
        """Library functions callable as ``receiver.name(...)``."""
        # Attached through using-for directives first
        for contract in self.hierarchy(caller.contract):
            for library, target in self.contracts[contract].using_for:
                if target in ("*", receiver_type) or _strip_type(target) == receiver_type:
                    found = self.matching(library.split(".")[-1], name, arity + 1, _CALLABLE_KINDS)
                    if found:
                        return found
        # Otherwise a library function whose first parameter takes the receiver
        found = []
        for contract, definition in self.contracts.items():
            if definition.kind != "library":
                continue
            for candidate in self.matching(contract, name, arity + 1, _CALLABLE_KINDS):
                first = candidate.parameters[0].type_name if candidate.parameters else None
                if _strip_type(first) == receiver_type:
                    found.append(candidate)
        return found

    # Resolution

    def edge(self, site: CallSite, callee: FunctionDef, kind: EdgeKind, resolution: Resolution = "exact", candidates: tuple[str, ...] = ()) -> CallEdge:
        return CallEdge(
            caller=site.caller,
            callee=callee.id,
            kind=kind,
            resolution=resolution,
            site=site.span,
            candidates=candidates,
        )

    def resolve(self, site: CallSite) -> tuple[list[CallEdge], str | None]:
        caller = self.unit.function(site.caller)
        if site.kind_hint == "modifier-invocation":
            return self.resolve_modifier(site, caller)
        if site.kind_hint == "new":
            constructor = self.constructor_of(site.callee_name)
            if constructor is None:
                return [], f"{site.callee_name} declares no constructor"
            return [self.edge(site, constructor, "constructor")], None
        if site.kind_hint == "bare":
            found = self.lookup(caller.contract, site.callee_name, site.arg_count, _CALLABLE_KINDS)
            if not found:
                return [], f"no function {site.callee_name}/{site.arg_count} in the hierarchy of {caller.contract}"
            chosen, resolution, candidates = self.choose(found)
            return [self.edge(site, chosen, "internal", resolution, candidates)], None
        return self.resolve_member(site, caller)

    def resolve_modifier(self, site: CallSite, caller: FunctionDef) -> tuple[list[CallEdge], str | None]:
        if site.callee_name in self.contracts:
            # Base constructor specifier in a constructor header
            constructor = self.constructor_of(site.callee_name)
            if constructor is None:
                return [], f"{site.callee_name} declares no constructor"
            return [self.edge(site, constructor, "constructor")], None
        found = self.lookup(caller.contract, site.callee_name, site.arg_count, ("modifier",))
        if not found:
            found = [
                d
                for d in self.unit.modifiers
                if d.name == site.callee_name and d.arity == site.arg_count
            ]
        if not found:
            return [], f"no modifier {site.callee_name}/{site.arg_count}"
        chosen, resolution, candidates = self.choose(found)
        return [self.edge(site, chosen, "modifier", resolution, candidates)], None

    def resolve_member(self, site: CallSite, caller: FunctionDef) -> tuple[list[CallEdge], str | None]:
        qualifier = site.qualifier or ""
        name, arity = site.callee_name, site.arg_count

        if qualifier == "super":
            found = self.lookup(caller.contract, name, arity, _CALLABLE_KINDS, skip_self=True)
            if not found:
                return [], f"no base function {name}/{arity} for super"
            chosen, resolution, candidates = self.choose(found)
            return [self.edge(site, chosen, "internal", resolution, candidates)], None

        receiver_type = self.type_of(qualifier, caller)
        if receiver_type is None:
            return [], f"cannot type receiver '{qualifier}'"

        edges: list[CallEdge] = []
        if name.startswith("clone"):
            # Clone-with-init: the clone runs the implementation's code
            inner = _CAST.match(qualifier)
            implementation = self.type_of(inner.group("inner"), caller) if inner else receiver_type
            constructor = self.constructor_of(implementation)
            if constructor is not None:
                edges.append(self.edge(site, constructor, "constructor"))

        if receiver_type in self.contracts:
            declared = self.lookup(receiver_type, name, arity, _CALLABLE_KINDS)
            if declared:
                chosen, resolution, candidates = self.choose(
                    self.implementations(declared, receiver_type)
                )
                edges.append(self.edge(site, chosen, "external", resolution, candidates))
                return edges, None

        found = self.library_functions(caller, receiver_type, name, arity)
        if not found:
            return edges, f"no function {name}/{arity} for receiver type {receiver_type}"
        chosen, resolution, candidates = self.choose(found)
        edges.append(self.edge(site, chosen, "external", resolution, candidates))
        return edges, None


def write_adjacency(graph: CallGraph, path: str | Path) -> Path:
    """Write the graph as ``callerId -> calleeId [kind,resolution]`` lines.

    Nodes without outgoing or incoming edges are written as a bare id so the
    node set survives a round trip.

    Args:
        graph: The call graph.
        path: Target file.

    Returns:
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    linked = {edge.callee for edge in graph.edges()}
    lines = []
    for node in graph.nodes:
        edges = graph.adjacency.get(node, ())
        if not edges and node not in linked:
            lines.append(node)
        lines.extend(
            f"{edge.caller} -> {edge.callee} [{edge.kind},{edge.resolution}]" for edge in edges
        )
    path.write_text("".join(f"{line}\n" for line in lines))
    return path


def read_adjacency(path: str | Path) -> CallGraph:
    """Reload a graph written by :func:`write_adjacency`.

    Args:
        path: Adjacency file.

    Returns:
        The call graph without call-site spans or an attached unit.

    Raises:
        ValueError: If a line is neither an edge nor a bare id.
    """
    nodes: list[str] = []
    edges: list[CallEdge] = []
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        match = _ADJACENCY_LINE.match(line)
        if match:
            nodes.extend([match.group("caller"), match.group("callee")])
            edges.append(
                CallEdge(
                    caller=match.group("caller"),
                    callee=match.group("callee"),
                    kind=match.group("kind"),  # type: ignore[arg-type]
                    resolution=match.group("resolution"),  # type: ignore[arg-type]
                )
            )
        elif " " not in line:
            nodes.append(line)
        else:
            raise ValueError(f"Line {number} of {path} is not an adjacency record: {line}")
    return CallGraph.from_edges(nodes, edges)


def to_dot(graph: CallGraph) -> str:
    """Render the graph in DOT format, edges labelled with their kind."""
    drawing = nx.MultiDiGraph()
    for node in graph.nodes:
        drawing.add_node(f'"{node}"')
    for edge in graph.edges():
        drawing.add_edge(f'"{edge.caller}"', f'"{edge.callee}"', label=edge.kind)
    return nx.drawing.nx_pydot.to_pydot(drawing).to_string()
