"""Parse a pragmatic subset of Solidity into declarations and call sites.

The parser does not build an expression tree. It finds contract, function,
modifier and state-variable declarations by brace matching on the masked
source (see :mod:`coaudit.scoping.lexing`) and scans function bodies for
call expressions. Everything else stays opaque text inside the spans.
"""

import bisect
import json
import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING
from typing import Literal

from coaudit.errors import SoliditySyntaxError
from coaudit.errors import UnknownContractError
from coaudit.errors import UnknownFunctionError
from coaudit.scoping.lexing import CONTRACT_HEADER
from coaudit.scoping.lexing import IDENTIFIER
from coaudit.scoping.lexing import leading_comment_start
from coaudit.scoping.lexing import lex
from coaudit.scoping.lexing import line_at
from coaudit.scoping.lexing import matching_close
from coaudit.scoping.lexing import split_top_level

if TYPE_CHECKING:
    from coaudit.scoping.ingest import FlattenedSource

logger = logging.getLogger(__name__)

ContractKind = Literal["contract", "interface", "library", "abstract"]
FunctionKind = Literal[
    "function", "constructor", "fallback", "receive", "modifier", "getter"
]
Visibility = Literal["public", "external", "internal", "private"]
Mutability = Literal["none", "view", "pure", "payable"]
CallKind = Literal["bare", "member", "new", "modifier-invocation"]

# Calls that never become call sites
BUILTIN_CALLS = frozenset(
    {
        "require",
        "assert",
        "revert",
        "keccak256",
        "sha256",
        "sha3",
        "ripemd160",
        "ecrecover",
        "addmod",
        "mulmod",
        "selfdestruct",
        "suicide",
        "blockhash",
        "gasleft",
        "type",
        "address",
        "payable",
    }
)
MEMBER_BUILTINS = frozenset(
    {"call", "delegatecall", "staticcall", "callcode", "send", "value", "gas", "push", "pop"}
)
BUILTIN_ROOTS = frozenset({"abi", "msg", "block", "tx"})

_KEYWORDS = frozenset(
    {
        "if",
        "else",
        "for",
        "while",
        "do",
        "return",
        "returns",
        "emit",
        "new",
        "try",
        "catch",
        "unchecked",
        "assembly",
        "function",
        "mapping",
        "event",
        "modifier",
        "constructor",
        "delete",
        "throw",
        "var",
        "struct",
        "enum",
        "using",
        "is",
        "error",
        "override",
        "virtual",
    }
)
_ELEMENTARY = re.compile(r"(?:u?int\d*|bytes\d*|address|bool|string|byte|u?fixed[\dx]*)\Z")
_VISIBILITIES = frozenset({"public", "external", "internal", "private"})
_MUTABILITIES: dict[str, Mutability] = {
    "view": "view",
    "pure": "pure",
    "payable": "payable",
    "constant": "view",
}
_LOCATIONS = frozenset({"memory", "storage", "calldata", "indexed", "payable"})
_VARIABLE_QUALIFIERS = frozenset(
    {"constant", "immutable", "override", "transient", "payable"}
)

_WORD = re.compile(IDENTIFIER)
_CALL_CANDIDATE = re.compile(rf"(?<![\w$])({IDENTIFIER})\s*(?=[({{])")
_ITEM_KEYWORD = re.compile(rf"\s*({IDENTIFIER})")
_FUNCTION_HEAD = re.compile(rf"function\s*({IDENTIFIER})?\s*\(")
_MODIFIER_HEAD = re.compile(rf"modifier\s+({IDENTIFIER})\s*(\()?")
_TYPE_NAMES = re.compile(rf"\b(?:struct|enum|event|error)\s+({IDENTIFIER})|\btype\s+({IDENTIFIER})\s+is\b")
_USING = re.compile(rf"using\s+({IDENTIFIER}(?:\.{IDENTIFIER})*)\s+for\s+([^;]+?)\s*;")
_ASSEMBLY = re.compile(r"\bassembly\b[^{;]*\{")
_LOCAL = re.compile(
    rf"(?<![\w$.])(?P<type>{IDENTIFIER}(?:\.{IDENTIFIER})?(?:\s*\[[^\]]*\])*)\s+"
    rf"(?:(?:memory|storage|calldata)\s+)?(?P<name>{IDENTIFIER})\s*(?:=(?!=)|;)"
)
_SIMPLE_TYPE = re.compile(rf"{IDENTIFIER}(?:\.{IDENTIFIER})*(?:\s*\[[^\]]*\])*")


@dataclass(frozen=True)
class SourceSpan:
    """Half-open character range of the parsed text with its first line."""

    start: int
    end: int
    line: int

    def text(self, source: str) -> str:
        """Return the spanned slice of ``source``."""
        return source[self.start : self.end]


@dataclass(frozen=True)
class Parameter:
    """A function parameter or named return value."""

    name: str | None
    type_name: str


@dataclass(frozen=True)
class StateVariable:
    """A state variable declaration.

    Attributes:
        name: Variable name.
        type_name: Declared type, whitespace-normalized.
        value_type: Type reached after all mapping keys and array indexes.
        key_count: Number of mapping keys plus array dimensions.
        visibility: Declared visibility, 'internal' when omitted.
        span: Declaration span including leading comments.
    """

    name: str
    type_name: str
    value_type: str
    key_count: int
    visibility: Visibility
    span: SourceSpan


@dataclass(frozen=True)
class ContractDef:
    """A contract, interface, library or abstract contract.

    Attributes:
        name: Contract name.
        kind: Declaration keyword, 'abstract' for abstract contracts.
        bases: Base contract names in declaration order.
        span: The whole declaration including leading comments.
        state_var_span: From the first to the last state variable, if any.
        state_vars: State variables in declaration order.
        using_for: (library, type) pairs of ``using L for T`` directives.
    """

    name: str
    kind: ContractKind
    bases: tuple[str, ...]
    span: SourceSpan
    state_var_span: SourceSpan | None
    state_vars: tuple[StateVariable, ...] = ()
    using_for: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class FunctionDef:
    """A function, constructor, fallback, receive, modifier or getter.

    The id has the form ``Contract.name/arity``; a second declaration with the
    same id gets a ``#2`` suffix and the id is listed as ambiguous.
    """

    id: str
    contract: str
    name: str
    kind: FunctionKind
    arity: int
    visibility: Visibility
    mutability: Mutability
    modifiers: tuple[str, ...]
    span: SourceSpan
    body_present: bool
    parameters: tuple[Parameter, ...] = ()
    returns: tuple[str, ...] = ()
    variables: tuple[tuple[str, str], ...] = ()
    body_span: SourceSpan | None = None


# Modifiers share the representation of functions, with kind 'modifier'
ModifierDef = FunctionDef


@dataclass(frozen=True)
class CallSite:
    """A call expression found in a function body or header.

    Attributes:
        caller: Id of the enclosing function or modifier.
        callee_name: Called identifier.
        qualifier: Receiver expression text of a member call.
        arg_count: Number of top-level arguments.
        kind_hint: Syntactic form of the call.
        span: From the receiver (or ``new``) to the closing parenthesis.
    """

    caller: str
    callee_name: str
    qualifier: str | None
    arg_count: int
    kind_hint: CallKind
    span: SourceSpan


@dataclass(frozen=True)
class ParsedUnit:
    """Declarations and call sites of one flattened source text."""

    text: str
    contracts: tuple[ContractDef, ...]
    functions: tuple[FunctionDef, ...]
    modifiers: tuple[FunctionDef, ...]
    call_sites: tuple[CallSite, ...]
    type_names: frozenset[str] = frozenset()
    ambiguous: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @cached_property
    def definitions(self) -> dict[str, FunctionDef]:
        """All functions, getters and modifiers by id, in source order."""
        merged = sorted(self.functions + self.modifiers, key=lambda d: d.span.start)
        return {definition.id: definition for definition in merged}

    @cached_property
    def contracts_by_name(self) -> dict[str, ContractDef]:
        """Contracts by name."""
        return {contract.name: contract for contract in self.contracts}

    def contract(self, name: str) -> ContractDef:
        """Look up a contract by name.

        Raises:
            UnknownContractError: If no contract has that name.
        """
        try:
            return self.contracts_by_name[name]
        except KeyError:
            raise UnknownContractError(f"Contract {name} is not declared") from None

    def function(self, function_id: str) -> FunctionDef:
        """Look up a function or modifier by id.

        Raises:
            UnknownFunctionError: If no definition has that id.
        """
        try:
            return self.definitions[function_id]
        except KeyError:
            raise UnknownFunctionError(f"Function {function_id} is not declared") from None

    def members(self, contract: str) -> list[FunctionDef]:
        """Definitions declared directly in a contract, in source order."""
        return [d for d in self.definitions.values() if d.contract == contract]


def parse(source: "FlattenedSource | str") -> ParsedUnit:
    """Parse a flattened Solidity text.

    Args:
        source: A flattened source or plain Solidity text.

    Returns:
        The parsed declarations and call sites.

    Raises:
        ValueError: If the text is empty.
        SoliditySyntaxError: If braces, parentheses, strings or comments are
            unbalanced.
    """
    text = source if isinstance(source, str) else source.text
    if not text.strip():
        raise ValueError("Cannot parse an empty source text.")
    unit = _Parser(text).run()
    logger.info(
        "Parsed %s contract(s), %s function(s), %s modifier(s), %s call site(s)",
        len(unit.contracts),
        len(unit.functions),
        len(unit.modifiers),
        len(unit.call_sites),
    )
    return unit


def extract_functions(unit: ParsedUnit, contract: str) -> list[FunctionDef]:
    """List the functions of a contract, including inherited ones.

    Own functions come first in declaration order, followed by functions
    inherited from bases declared in the same unit that the contract does
    not override (same name and arity). Getters and modifiers are excluded.

    Args:
        unit: The parsed unit.
        contract: Contract name.

    Returns:
        The function definitions, each tagged with its defining contract.

    Raises:
        UnknownContractError: If the contract is not declared in the unit.
    """
    unit.contract(contract)
    functions: list[FunctionDef] = []
    seen: set[tuple[str, int]] = set()
    visited: set[str] = set()
    pending = [contract]
    while pending:
        name = pending.pop(0)
        if name in visited or name not in unit.contracts_by_name:
            continue
        visited.add(name)
        for definition in unit.members(name):
            if definition.kind in ("modifier", "getter"):
                continue
            if name != contract and definition.kind == "constructor":
                continue
            key = (definition.name, definition.arity)
            if key in seen:
                continue
            seen.add(key)
            functions.append(definition)
        pending.extend(unit.contracts_by_name[name].bases)
    return functions


def extract_call_sites(fn: FunctionDef, unit: ParsedUnit) -> list[CallSite]:
    """Return the call sites of a function in source order."""
    return [site for site in unit.call_sites if site.caller == fn.id]


def dump_declarations(unit: ParsedUnit) -> str:
    """Render every declaration as one JSON record per line.

    Args:
        unit: The parsed unit.

    Returns:
        JSON lines with keys kind, id, start, end, line, modifiers.
    """
    records = [
        (c.span.start, 0, c.kind, c.name, c.span, ()) for c in unit.contracts
    ] + [
        (d.span.start, 1, d.kind, d.id, d.span, d.modifiers)
        for d in unit.definitions.values()
    ]
    lines = []
    for _, _, kind, identifier, span, modifiers in sorted(records, key=lambda r: r[:2]):
        record = {
            "kind": kind,
            "id": identifier,
            "start": span.start,
            "end": span.end,
            "line": span.line,
            "modifiers": list(modifiers),
        }
        lines.append(json.dumps(record))
    return "".join(f"{line}\n" for line in lines)


def _split_type(text: str) -> tuple[str, str]:
    """Split a normalized declaration into its type and the remainder."""
    if text.startswith("mapping"):
        depth = 0
        for index, char in enumerate(text):
            if char == "(":
                depth += 1
            elif char == ")":
                depth -= 1
                if depth == 0:
                    return text[: index + 1], text[index + 1 :]
        return text, ""
    match = _SIMPLE_TYPE.match(text)
    if match is None:
        return "", text
    return re.sub(r"\s+", "", match.group(0)), text[match.end() :]


def _value_type(type_name: str) -> tuple[str, int]:
    """Return the type behind all mapping keys and array indexes."""
    keys = 0
    current = type_name
    while current.startswith("mapping"):
        inner = current[current.index("(") + 1 : current.rindex(")")]
        current = inner.split("=>", 1)[1].strip()
        keys += 1
    keys += current.count("[")
    return re.sub(r"\s*\[[^\]]*\]", "", current).strip(), keys


class _Parser:
    """Single-use parser state for one text."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.lexed = lex(text)
        self.code = self.lexed.code
        self.newlines = [i for i, char in enumerate(text) if char == "\n"]
        self.contracts: list[ContractDef] = []
        self.functions: list[FunctionDef] = []
        self.modifiers: list[FunctionDef] = []
        self.call_sites: list[CallSite] = []
        self.warnings: list[str] = []
        self.ambiguous: list[str] = []
        self.ids: set[str] = set()
        self.contract_names: set[str] = set()
        self.type_names: set[str] = set()

    def run(self) -> ParsedUnit:
        self._check_balanced()
        found = self._scan_contracts()
        self.contract_names = {match.group("name") for match, *_ in found}
        for match in _TYPE_NAMES.finditer(self.code):
            self.type_names.add(match.group(1) or match.group(2))
        for match, body_open, body_close, items in found:
            self._contract(match, body_open, body_close, items)
        return ParsedUnit(
            text=self.text,
            contracts=tuple(self.contracts),
            functions=tuple(self.functions),
            modifiers=tuple(self.modifiers),
            call_sites=tuple(self.call_sites),
            type_names=frozenset(self.type_names),
            ambiguous=tuple(dict.fromkeys(self.ambiguous)),
            warnings=tuple(self.warnings),
        )

    def _span(self, start: int, end: int) -> SourceSpan:
        return SourceSpan(start, end, bisect.bisect_left(self.newlines, start) + 1)

    def _warn(self, message: str) -> None:
        logger.warning(message)
        self.warnings.append(message)

    def _check_balanced(self) -> None:
        stack: list[int] = []
        pairs = {")": "(", "]": "[", "}": "{"}
        for index, char in enumerate(self.code):
            if char in "([{":
                stack.append(index)
            elif char in pairs:
                if not stack or self.code[stack[-1]] != pairs[char]:
                    raise SoliditySyntaxError(
                        f"Unexpected '{char}'", line_at(self.text, index)
                    )
                stack.pop()
        if stack:
            raise SoliditySyntaxError(
                f"Unclosed '{self.code[stack[-1]]}'", line_at(self.text, stack[-1])
            )

    def _scan_contracts(self) -> list[tuple[re.Match[str], int, int, list[tuple[int, int]]]]:
        found = []
        position = 0
        while True:
            match = CONTRACT_HEADER.search(self.code, position)
            gap_end = match.start() if match else len(self.code)
            for free in re.finditer(r"\bfunction\b", self.code[position:gap_end]):
                line = line_at(self.text, position + free.start())
                self._warn(f"Skipped free function at line {line}")
            if match is None:
                break
            body_open = match.end() - 1
            body_close = matching_close(self.code, body_open)
            found.append((match, body_open, body_close, self._items(body_open + 1, body_close)))
            position = body_close + 1
        return found

    def _items(self, start: int, end: int) -> list[tuple[int, int]]:
        """Split a contract body into declarations ending in ';' or '}'."""
        items = []
        depth = 0
        item_start: int | None = None
        for index in range(start, end):
            char = self.code[index]
            if item_start is None and not char.isspace():
                item_start = index
            if char in "([{":
                depth += 1
            elif char in ")]}":
                depth -= 1
                if char == "}" and depth == 0 and item_start is not None:
                    items.append((item_start, index + 1))
                    item_start = None
            elif char == ";" and depth == 0 and item_start is not None:
                items.append((item_start, index + 1))
                item_start = None
        return items

    def _contract(
        self,
        match: re.Match[str],
        body_open: int,
        body_close: int,
        items: list[tuple[int, int]],
    ) -> None:
        name = match.group("name")
        kind: ContractKind = "abstract" if match.group("abstract") else match.group("kind")  # type: ignore[assignment]
        bases = self._bases(match.group("rest"))
        for base in bases:
            if base not in self.contract_names:
                self._warn(f"Base {base} of {name} is not declared in the unit")

        state_vars: list[StateVariable] = []
        using_for: list[tuple[str, str]] = []
        for start, end in items:
            keyword_match = _ITEM_KEYWORD.match(self.code, start)
            keyword = keyword_match.group(1) if keyword_match else ""
            head = self.code[start:end]
            if keyword in ("function", "constructor", "modifier") or (
                keyword in ("fallback", "receive") and re.match(rf"{keyword}\s*\(", head)
            ):
                self._function(name, kind, start, end, keyword)
            elif keyword == "using":
                using = _USING.match(" ".join(head.split()))
                if using:
                    target = using.group(2).replace(" global", "").strip()
                    using_for.append((using.group(1), target))
            elif keyword in ("struct", "enum", "event", "error", "type"):
                continue
            else:
                variable = self._state_variable(name, start, end)
                if variable is not None:
                    state_vars.append(variable)

        state_var_span = None
        if state_vars:
            state_var_span = self._span(state_vars[0].span.start, state_vars[-1].span.end)
        start = leading_comment_start(self.lexed, match.start())
        self.contracts.append(
            ContractDef(
                name=name,
                kind=kind,
                bases=bases,
                span=self._span(start, body_close + 1),
                state_var_span=state_var_span,
                state_vars=tuple(state_vars),
                using_for=tuple(using_for),
            )
        )

    @staticmethod
    def _bases(rest: str) -> tuple[str, ...]:
        rest = rest.strip()
        if not rest.startswith("is"):
            return ()
        bases = []
        for part in split_top_level(rest, 2, len(rest)):
            found = re.search(rf"{IDENTIFIER}(?:\.{IDENTIFIER})*", rest[part[0] : part[1]])
            if found:
                bases.append(found.group(0).split(".")[-1])
        return tuple(bases)

    def _unique_id(self, base_id: str) -> str:
        if base_id not in self.ids:
            self.ids.add(base_id)
            return base_id
        self._warn(f"Declaration {base_id} is not unique; numbering the duplicate")
        self.ambiguous.append(base_id)
        number = 2
        while f"{base_id}#{number}" in self.ids:
            number += 1
        unique = f"{base_id}#{number}"
        self.ids.add(unique)
        return unique

    def _parameters(self, start: int, end: int) -> tuple[Parameter, ...]:
        parameters = []
        for part_start, part_end in split_top_level(self.code, start, end):
            text = " ".join(self.code[part_start:part_end].split())
            type_name, remainder = _split_type(text)
            words = [word for word in remainder.split() if word not in _LOCATIONS]
            name = words[-1] if words else None
            parameters.append(Parameter(name=name, type_name=type_name))
        return tuple(parameters)

    def _function(
        self, contract: str, contract_kind: ContractKind, start: int, end: int, keyword: str
    ) -> None:
        code = self.code
        paren_open: int | None
        kind: FunctionKind
        if keyword == "function":
            head = _FUNCTION_HEAD.match(code, start)
            # Function-typed state variables look like old fallbacks without a body
            function_type = head is not None and head.group(1) is None and code[end - 1] == ";"
            if head is None or (function_type and contract_kind != "interface"):
                self._warn(f"Skipped function type declaration at line {line_at(self.text, start)}")
                return
            raw_name = head.group(1)
            paren_open = head.end() - 1
            if raw_name is None:
                kind, name = "fallback", "fallback"
            elif raw_name == contract:
                kind, name = "constructor", "constructor"
            else:
                kind, name = "function", raw_name
        elif keyword == "modifier":
            head = _MODIFIER_HEAD.match(code, start)
            if head is None:
                return
            kind, name = "modifier", head.group(1)
            paren_open = head.end() - 1 if head.group(2) else None
        else:
            head = re.compile(rf"{keyword}\s*\(").match(code, start)
            if head is None:
                return
            kind, name = keyword, keyword  # type: ignore[assignment]
            paren_open = head.end() - 1

        parameters: tuple[Parameter, ...] = ()
        tail_start = head.end()
        if paren_open is not None:
            paren_close = matching_close(code, paren_open)
            parameters = self._parameters(paren_open + 1, paren_close)
            tail_start = paren_close + 1

        # Body opens at the first '{' outside the header's parentheses
        body_open = None
        depth = 0
        for index in range(tail_start, end):
            char = code[index]
            if char in "([":
                depth += 1
            elif char in ")]":
                depth -= 1
            elif char == "{" and depth == 0:
                body_open = index
                break
        header_end = body_open if body_open is not None else end - 1

        visibility: Visibility | None = None
        mutability: Mutability = "none"
        returns: tuple[Parameter, ...] = ()
        invocations: list[tuple[str, int, int, tuple[int, int] | None]] = []
        position = tail_start
        while position < header_end:
            word = _WORD.search(code, position, header_end)
            if word is None:
                break
            after = word.end()
            look = after
            while look < header_end and code[look].isspace():
                look += 1
            arguments = None
            if look < header_end and code[look] == "(":
                close = matching_close(code, look)
                arguments = (look, close)
                after = close + 1
            token = word.group(0)
            if token in _VISIBILITIES:
                visibility = token  # type: ignore[assignment]
            elif token in _MUTABILITIES:
                mutability = _MUTABILITIES[token]
            elif token == "returns" and arguments is not None:
                returns = self._parameters(arguments[0] + 1, arguments[1])
            elif token not in ("virtual", "override"):
                invocations.append((token, word.start(), after, arguments))
            position = after

        if visibility is None:
            if contract_kind == "interface" or kind in ("fallback", "receive"):
                visibility = "external"
            elif kind == "modifier":
                visibility = "internal"
            else:
                visibility = "public"

        function_id = self._unique_id(f"{contract}.{name}/{len(parameters)}")
        variables = [(p.name, p.type_name) for p in parameters + returns if p.name]
        body_span = None
        if body_open is not None:
            body_span = self._span(body_open, end)
            variables.extend(self._locals(body_open + 1, end - 1))

        definition = FunctionDef(
            id=function_id,
            contract=contract,
            name=name,
            kind=kind,
            arity=len(parameters),
            visibility=visibility,
            mutability=mutability,
            modifiers=tuple(
                token for token, *_ in invocations if token not in self.contract_names
            ),
            span=self._span(leading_comment_start(self.lexed, start), end),
            body_present=body_open is not None,
            parameters=parameters,
            returns=tuple(p.type_name for p in returns),
            variables=tuple(variables),
            body_span=body_span,
        )
        if kind == "modifier":
            self.modifiers.append(definition)
        else:
            self.functions.append(definition)

        for token, token_start, token_end, arguments in invocations:
            count = 0
            if arguments is not None:
                count = len(split_top_level(code, arguments[0] + 1, arguments[1]))
            self.call_sites.append(
                CallSite(
                    caller=function_id,
                    callee_name=token,
                    qualifier=None,
                    arg_count=count,
                    kind_hint="modifier-invocation",
                    span=self._span(token_start, token_end),
                )
            )
        if body_open is not None:
            self._call_sites(function_id, body_open + 1, end - 1)

    def _state_variable(self, contract: str, start: int, end: int) -> StateVariable | None:
        text = " ".join(self.code[start:end].rstrip(";").split())
        type_name, remainder = _split_type(text)
        if not type_name:
            return None
        declaration = re.split(r"=(?!>)", remainder, maxsplit=1)[0].split()
        if not declaration or not re.fullmatch(IDENTIFIER, declaration[-1]):
            self._warn(f"Skipped unsupported declaration at line {line_at(self.text, start)}")
            return None
        name = declaration[-1]
        qualifiers = set(declaration[:-1])
        unknown = qualifiers - _VISIBILITIES - _VARIABLE_QUALIFIERS
        if unknown:
            self._warn(f"Skipped unsupported declaration at line {line_at(self.text, start)}")
            return None
        visible = qualifiers & _VISIBILITIES
        visibility: Visibility = visible.pop() if visible else "internal"  # type: ignore[assignment]
        value_type, key_count = _value_type(type_name)
        span = self._span(leading_comment_start(self.lexed, start), end)
        variable = StateVariable(
            name=name,
            type_name=type_name,
            value_type=value_type,
            key_count=key_count,
            visibility=visibility,
            span=span,
        )
        if visibility == "public":
            self.functions.append(
                FunctionDef(
                    id=self._unique_id(f"{contract}.{name}/{key_count}"),
                    contract=contract,
                    name=name,
                    kind="getter",
                    arity=key_count,
                    visibility="external",
                    mutability="view",
                    modifiers=(),
                    span=span,
                    body_present=False,
                    returns=(value_type,),
                )
            )
        return variable

    def _locals(self, start: int, end: int) -> list[tuple[str, str]]:
        found = []
        for match in _LOCAL.finditer(self.code, start, end):
            type_name = re.sub(r"\s+", "", match.group("type"))
            name = match.group("name")
            if type_name in _KEYWORDS or name in _KEYWORDS:
                continue
            found.append((name, type_name))
        return found

    def _is_identifier_char(self, index: int) -> bool:
        char = self.code[index]
        return char.isalnum() or char in "_$"

    def _skip_space_back(self, index: int, floor: int) -> int:
        while index >= floor and self.code[index].isspace():
            index -= 1
        return index

    def _matching_open(self, close: int, floor: int) -> int:
        depth = 0
        for index in range(close, floor - 1, -1):
            char = self.code[index]
            if char in ")]}":
                depth += 1
            elif char in "([{":
                depth -= 1
                if depth == 0:
                    return index
        return floor

    def _previous_token(self, index: int, floor: int) -> tuple[str, int]:
        cursor = self._skip_space_back(index - 1, floor)
        if cursor < floor:
            return "", index
        if not self._is_identifier_char(cursor):
            return self.code[cursor], cursor
        end = cursor + 1
        while cursor >= floor and self._is_identifier_char(cursor):
            cursor -= 1
        return self.code[cursor + 1 : end], cursor + 1

    def _receiver(self, dot: int, floor: int) -> tuple[str, int]:
        """Scan backwards from a member-access dot over the receiver."""
        cursor = dot - 1
        start = dot
        while True:
            cursor = self._skip_space_back(cursor, floor)
            if cursor < floor:
                break
            if self.code[cursor] in ")]":
                opening = self._matching_open(cursor, floor)
                start = opening
                cursor = opening - 1
                continue
            if self._is_identifier_char(cursor):
                word_end = cursor + 1
                while cursor >= floor and self._is_identifier_char(cursor):
                    cursor -= 1
                if self.code[cursor + 1 : word_end] in _KEYWORDS:
                    break
                start = cursor + 1
                before = self._skip_space_back(cursor, floor)
                if before >= floor and self.code[before] == ".":
                    cursor = before - 1
                    continue
            break
        return " ".join(self.text[start:dot].split()), start

    def _call_sites(self, caller: str, start: int, end: int) -> None:
        code = self.code
        # Assembly blocks stay opaque
        opaque = []
        for block in _ASSEMBLY.finditer(code, start, end):
            opaque.append((block.start(), matching_close(code, block.end() - 1) + 1))

        for match in _CALL_CANDIDATE.finditer(code, start, end):
            name = match.group(1)
            name_start = match.start(1)
            if name in _KEYWORDS or any(a <= name_start < b for a, b in opaque):
                continue
            paren = match.end()
            if code[paren] == "{":
                # Call options such as {value: amount}
                close = matching_close(code, paren)
                paren = close + 1
                while paren < end and code[paren].isspace():
                    paren += 1
                if paren >= end or code[paren] != "(":
                    continue
            paren_close = matching_close(code, paren)

            previous, previous_start = self._previous_token(name_start, start)
            qualifier = None
            if previous == ".":
                qualifier, site_start = self._receiver(previous_start, start)
                root = _WORD.match(qualifier)
                if name in MEMBER_BUILTINS or (root and root.group(0) in BUILTIN_ROOTS):
                    continue
                kind: CallKind = "member"
            elif previous == "new":
                if _ELEMENTARY.match(name):
                    continue
                kind, site_start = "new", previous_start
            elif previous in ("emit", "revert", "function", "event", "error"):
                continue
            else:
                if name in BUILTIN_CALLS or _ELEMENTARY.match(name):
                    continue
                # Conversions and struct literals
                if name in self.contract_names or name in self.type_names:
                    continue
                kind, site_start = "bare", name_start

            arguments = split_top_level(code, paren + 1, paren_close)
            self.call_sites.append(
                CallSite(
                    caller=caller,
                    callee_name=name,
                    qualifier=qualifier,
                    arg_count=len(arguments),
                    kind_hint=kind,
                    span=self._span(site_start, paren_close + 1),
                )
            )
