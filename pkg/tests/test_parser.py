import json

import pytest

from coaudit import extract_call_sites
from coaudit import extract_functions
from coaudit import parse
from coaudit.errors import SoliditySyntaxError
from coaudit.errors import UnknownContractError
from coaudit.errors import UnknownFunctionError
from coaudit.scoping.ccl import extract_code
from coaudit.scoping.ingest import FlattenedSource
from coaudit.scoping.lexing import lex
from coaudit.scoping.parser import dump_declarations

OVERLOADS = """
contract Base {
    uint256 internal total;
    function bump() public virtual { total += 1; }
}

contract Child is Base {
    mapping(address => mapping(uint256 => bool)) public seen;
    address[] public holders;

    function bump() public override { super.bump(); }
    function add(uint256 a) external { total += a; }
    function add(uint256 a, uint256 b) external { total += a + b; }
    fallback() external payable {}
    receive() external payable {}
}
"""


def test_lex_masks_comments_and_strings() -> None:
    text = 'string s = "a } b"; // c {\n/* d\n } */ uint x;'
    lexed = lex(text)
    assert len(lexed.code) == len(text)
    assert "}" not in lexed.code
    assert lexed.code.count("\n") == 2
    assert len(lexed.comments) == 2


def test_lex_unterminated_string() -> None:
    with pytest.raises(SoliditySyntaxError, match="line 2"):
        lex('contract A {\n string s = "open;\n}')


def test_parse_empty() -> None:
    with pytest.raises(ValueError, match="empty"):
        parse("   \n")


def test_parse_unbalanced_braces() -> None:
    with pytest.raises(SoliditySyntaxError):
        parse("contract A { function f() public { ")


def test_parse_contract_kinds(vault_flat: FlattenedSource) -> None:
    unit = parse(vault_flat)
    kinds = {contract.name: contract.kind for contract in unit.contracts}
    assert kinds == {
        "ERC20": "contract",
        "ClonesWithImmutableArgs": "library",
        "ReentrancyGuard": "abstract",
        "ERC20CreditToken": "contract",
        "TokenizingVault": "contract",
    }
    assert unit.contract("ERC20CreditToken").bases == ("ERC20", "ReentrancyGuard")


def test_parse_function_ids(vault_flat: FlattenedSource) -> None:
    unit = parse(vault_flat)
    members = [d.id for d in unit.members("TokenizingVault")]
    assert members == [
        "TokenizingVault.creditTokens/1",
        "TokenizingVault.creditTokenImpl/0",
        "TokenizingVault.constructor/0",
        "TokenizingVault.create/2",
        "TokenizingVault.redeem/2",
        "TokenizingVault.deploy/1",
    ]
    deploy = unit.function("TokenizingVault.deploy/1")
    assert deploy.visibility == "external"
    assert deploy.modifiers == ("nonReentrant",)
    assert deploy.returns == ("ERC20CreditToken",)
    assert unit.function("ReentrancyGuard.nonReentrant/0").kind == "modifier"
    assert unit.function("ERC20CreditToken.constructor/3").modifiers == ()


def test_parse_getters_and_overloads() -> None:
    unit = parse(OVERLOADS)
    seen = unit.function("Child.seen/2")
    assert seen.kind == "getter"
    assert seen.returns == ("bool",)
    assert unit.function("Child.holders/1").kind == "getter"
    assert unit.function("Child.add/1").arity == 1
    assert unit.function("Child.add/2").arity == 2
    assert unit.function("Child.fallback/0").visibility == "external"
    assert unit.function("Child.receive/0").mutability == "payable"
    assert unit.ambiguous == ()


def test_parse_interface_signatures() -> None:
    source = (
        "interface IVault {\n"
        "    function deposit(uint256 amount) external;\n"
        "    function balanceOf(address owner) external view returns (uint256);\n"
        "}\n"
    )
    unit = parse(source)
    functions = extract_functions(unit, "IVault")

    assert [f.id for f in functions] == ["IVault.deposit/1", "IVault.balanceOf/1"]
    assert [f.body_present for f in functions] == [False, False]
    assert functions[1].mutability == "view"
    assert extract_code("IVault.deposit/1", source, unit) == "function deposit(uint256 amount) external;"


def test_parse_duplicate_ids_are_numbered() -> None:
    unit = parse(
        "contract A {\n"
        "    function f(uint256 x) public {}\n"
        "    function f(address x) public {}\n"
        "}\n"
    )
    assert list(unit.definitions) == ["A.f/1", "A.f/1#2"]
    assert unit.ambiguous == ("A.f/1",)


def test_parse_skips_free_functions() -> None:
    unit = parse("function helper() pure returns (uint256) { return 1; }\ncontract A {}\n")
    assert [contract.name for contract in unit.contracts] == ["A"]
    assert any("free function" in warning for warning in unit.warnings)


def test_function_span_includes_doc_comment(vault_flat: FlattenedSource) -> None:
    unit = parse(vault_flat)
    getter = unit.function("TokenizingVault.creditTokens/1")
    assert getter.span.text(unit.text).startswith("/// ERC20 accounting tokens")


def test_lookup_errors() -> None:
    unit = parse(OVERLOADS)
    with pytest.raises(UnknownContractError):
        unit.contract("Missing")
    with pytest.raises(UnknownFunctionError):
        unit.function("Child.missing/0")


def test_extract_functions_includes_inherited() -> None:
    unit = parse(OVERLOADS)
    result = [d.id for d in extract_functions(unit, "Child")]
    assert result == [
        "Child.bump/0",
        "Child.add/1",
        "Child.add/2",
        "Child.fallback/0",
        "Child.receive/0",
    ]


def test_extract_call_sites(vault_flat: FlattenedSource) -> None:
    unit = parse(vault_flat)
    sites = extract_call_sites(unit.function("TokenizingVault.deploy/1"), unit)
    result = [(s.callee_name, s.qualifier, s.arg_count, s.kind_hint) for s in sites]
    assert result == [
        ("nonReentrant", None, 0, "modifier-invocation"),
        ("clone", "address(creditTokenImpl)", 1, "member"),
    ]


def test_extract_call_sites_skips_builtins_and_casts(vault_flat: FlattenedSource) -> None:
    unit = parse(vault_flat)
    sites = extract_call_sites(unit.function("TokenizingVault.create/2"), unit)
    assert [s.callee_name for s in sites] == ["nonReentrant", "transferFrom", "mint"]


def test_call_options_and_low_level_calls() -> None:
    unit = parse(
        "contract A {\n"
        "    function pay(address to) public {\n"
        '        (bool ok, ) = to.call{value: 1}("");\n'
        "        require(ok);\n"
        "        helper{value: 1}();\n"
        "        assembly { let x := mload(0x40) }\n"
        "    }\n"
        "    function helper() public payable {}\n"
        "}\n"
    )
    sites = extract_call_sites(unit.function("A.pay/1"), unit)
    assert [(s.callee_name, s.kind_hint) for s in sites] == [("helper", "bare")]


def test_dump_declarations(vault_flat: FlattenedSource) -> None:
    records = [json.loads(line) for line in dump_declarations(parse(vault_flat)).splitlines()]
    assert records[0]["kind"] == "contract"
    assert records[0]["id"] == "ERC20"
    deploy = next(r for r in records if r["id"] == "TokenizingVault.deploy/1")
    assert deploy["modifiers"] == ["nonReentrant"]
    assert [r["start"] for r in records] == sorted(r["start"] for r in records)
