from pathlib import Path

import pytest

from coaudit import build_fcg
from coaudit import extract_call_sites
from coaudit import parse
from coaudit import reachable_set
from coaudit.errors import UnknownFunctionError
from coaudit.scoping.callgraph import CallEdge
from coaudit.scoping.callgraph import CallGraph
from coaudit.scoping.callgraph import read_adjacency
from coaudit.scoping.callgraph import to_dot
from coaudit.scoping.callgraph import write_adjacency
from coaudit.scoping.ingest import FlattenedSource

DIAMOND = """
contract A {
    function f() public virtual returns (uint256) { return 1; }
}
contract B is A {
    function f() public virtual override returns (uint256) { return 2; }
}
contract C is A {
    function f() public virtual override returns (uint256) { return 3; }
}
contract D is B, C {
    function f() public override(B, C) returns (uint256) { return super.f(); }
    function g() public returns (uint256) { return f(); }
}
"""


def _edges(graph: CallGraph, caller: str) -> list[tuple[str, str]]:
    return [(edge.callee, edge.kind) for edge in graph.adjacency[caller]]


def test_deploy_edges(vault_graph: CallGraph) -> None:
    assert _edges(vault_graph, "TokenizingVault.deploy/1") == [
        ("ReentrancyGuard.nonReentrant/0", "modifier"),
        ("ERC20CreditToken.constructor/3", "constructor"),
        ("ClonesWithImmutableArgs.clone/2", "external"),
    ]


def test_constructor_edges(vault_graph: CallGraph) -> None:
    assert _edges(vault_graph, "TokenizingVault.constructor/0") == [
        ("ERC20CreditToken.constructor/3", "constructor")
    ]
    assert _edges(vault_graph, "ERC20CreditToken.constructor/3") == [
        ("ERC20.constructor/2", "constructor")
    ]


def test_member_calls_typed_through_getters(vault_graph: CallGraph) -> None:
    assert _edges(vault_graph, "TokenizingVault.redeem/2") == [
        ("ReentrancyGuard.nonReentrant/0", "modifier"),
        ("ERC20CreditToken.burn/2", "external"),
        ("ERC20CreditToken.underlying/0", "external"),
        ("ERC20.transfer/2", "external"),
    ]
    assert _edges(vault_graph, "ERC20CreditToken.burn/2") == [("ERC20._burn/2", "internal")]


def test_reachable_set(vault_graph: CallGraph) -> None:
    result = reachable_set(vault_graph, "TokenizingVault.redeem/2")
    assert result == [
        "ReentrancyGuard.nonReentrant/0",
        "ERC20CreditToken.burn/2",
        "ERC20._burn/2",
        "ERC20CreditToken.underlying/0",
        "ERC20.transfer/2",
        "ERC20._transfer/3",
    ]


def test_reachable_set_unknown_target(vault_graph: CallGraph) -> None:
    with pytest.raises(UnknownFunctionError):
        reachable_set(vault_graph, "TokenizingVault.missing/0")


def test_library_calls_through_using_for(etherbank_flat: FlattenedSource) -> None:
    graph = build_fcg(parse(etherbank_flat))
    assert _edges(graph, "EtherBank.deposit/0") == [
        ("SafeMath.add/2", "external"),
        ("SafeMath.add/2", "external"),
    ]
    assert _edges(graph, "EtherBank.withdrawAll/0") == [("Ownable.onlyOwner/0", "modifier")]
    # Transfers on plain addresses have no declared target
    reasons = [reason for site, reason in graph.unresolved if site.callee_name == "transfer"]
    assert len(reasons) == 2
    assert all("address" in reason for reason in reasons)


def test_super_and_most_derived_resolution() -> None:
    graph = build_fcg(parse(DIAMOND))
    [super_call] = graph.adjacency["D.f/0"]
    assert super_call.callee == "C.f/0"
    assert super_call.resolution == "exact"
    [own_call] = graph.adjacency["D.g/0"]
    assert own_call.callee == "D.f/0"
    assert own_call.kind == "internal"


def test_ambiguous_resolution_keeps_candidates() -> None:
    source = """
    interface IToken { function pay(uint256 amount) external; }
    contract X is IToken { function pay(uint256 amount) external {} }
    contract Y is IToken { function pay(uint256 amount) external {} }
    contract User {
        IToken token;
        function use() public { token.pay(1); }
    }
    """
    graph = build_fcg(parse(source))
    [edge] = graph.adjacency["User.use/0"]
    assert edge.resolution == "ambiguous"
    assert set(edge.candidates) == {"X.pay/1", "Y.pay/1"}


def test_adjacency_round_trip(vault_graph: CallGraph, tmp_path: Path) -> None:
    path = write_adjacency(vault_graph, tmp_path / "callgraph.txt")
    lines = path.read_text().splitlines()
    assert "TokenizingVault.deploy/1 -> ClonesWithImmutableArgs.clone/2 [external,exact]" in lines

    reloaded = read_adjacency(path)
    assert set(reloaded.nodes) == set(vault_graph.nodes)
    assert sorted((e.caller, e.callee, e.kind) for e in reloaded.edges()) == sorted(
        (e.caller, e.callee, e.kind) for e in vault_graph.edges()
    )


def test_read_adjacency_rejects_garbage(tmp_path: Path) -> None:
    (tmp_path / "callgraph.txt").write_text("A.f/0 calls B.g/0\n")
    with pytest.raises(ValueError, match="not an adjacency record"):
        read_adjacency(tmp_path / "callgraph.txt")


def test_from_edges_rejects_unknown_endpoint() -> None:
    with pytest.raises(ValueError, match="not a node"):
        CallGraph.from_edges(["A.f/0"], [CallEdge("A.f/0", "B.g/0", "internal")])


def test_to_dot(vault_graph: CallGraph) -> None:
    dot = to_dot(vault_graph)
    assert "digraph" in dot
    assert "TokenizingVault.deploy/1" in dot
    assert "constructor" in dot


def test_self_recursion() -> None:
    unit = parse(
        "contract Maths {\n"
        "    function fact(uint256 n) public pure returns (uint256) {\n"
        "        if (n == 0) { return 1; }\n"
        "        return n * fact(n - 1);\n"
        "    }\n"
        "}\n"
    )
    [site] = extract_call_sites(unit.function("Maths.fact/1"), unit)
    assert (site.callee_name, site.arg_count) == ("fact", 1)

    graph = build_fcg(unit)
    [edge] = graph.adjacency["Maths.fact/1"]
    assert edge.caller == edge.callee == "Maths.fact/1"
    assert edge.kind == "internal"
    assert reachable_set(graph, "Maths.fact/1") == []
