from pathlib import Path

import pytest

from coaudit import flatten
from coaudit import load_project
from coaudit.errors import DuplicateContractError
from coaudit.errors import MissingEntryError
from coaudit.errors import UnresolvedImportError
from coaudit.scoping.ingest import FlattenedSource
from coaudit.scoping.ingest import import_strings
from coaudit.scoping.ingest import origin_of
from coaudit.scoping.ingest import read_flattened
from coaudit.scoping.ingest import read_remappings
from coaudit.scoping.ingest import write_flattened

OZ_ERC20 = "lib/openzeppelin-contracts/contracts/token/ERC20/ERC20.sol"


def _write(root: Path, files: dict[str, str]) -> None:
    for name, content in files.items():
        (root / name).parent.mkdir(parents=True, exist_ok=True)
        (root / name).write_text(content, encoding="utf-8")


def test_import_strings() -> None:
    source = (
        'import "./A.sol";\n'
        "// import \"./Commented.sol\";\n"
        "import {B} from './B.sol';\n"
        'import * as C from "lib/C.sol";\n'
    )
    assert import_strings(source) == ["./A.sol", "./B.sol", "lib/C.sol"]


def test_read_remappings(vault_root: Path) -> None:
    result = read_remappings(vault_root / "remappings.txt")
    assert result == {"@openzeppelin/": "lib/openzeppelin-contracts/"}


def test_read_remappings_rejects_missing_separator(tmp_path: Path) -> None:
    (tmp_path / "remappings.txt").write_text("@oz/lib/oz/\n")
    with pytest.raises(ValueError, match="not 'prefix=dir'"):
        read_remappings(tmp_path / "remappings.txt")


def test_load_project_closes_over_imports(vault_root: Path) -> None:
    remappings = read_remappings(vault_root / "remappings.txt")
    project = load_project(vault_root, "src/TokenizingVault.sol", remappings)

    assert project.entry == "src/TokenizingVault.sol"
    assert set(project.files) == {
        "src/TokenizingVault.sol",
        "src/ERC20CreditToken.sol",
        "src/ReentrancyGuard.sol",
        "src/ClonesWithImmutableArgs.sol",
        OZ_ERC20,
    }
    assert project.files[OZ_ERC20].kind == "dependency"
    assert project.files["src/ReentrancyGuard.sol"].kind == "local"


def test_load_project_missing_entry(vault_root: Path) -> None:
    with pytest.raises(MissingEntryError):
        load_project(vault_root, "src/Missing.sol")


def test_load_project_unresolved_import(vault_root: Path) -> None:
    # Without the remapping the OpenZeppelin import cannot be found
    with pytest.raises(UnresolvedImportError, match="@openzeppelin"):
        load_project(vault_root, "src/TokenizingVault.sol")


def test_flatten_orders_dependencies_first(vault_flat: FlattenedSource) -> None:
    assert vault_flat.included_files == (
        OZ_ERC20,
        "src/ClonesWithImmutableArgs.sol",
        "src/ReentrancyGuard.sol",
        "src/ERC20CreditToken.sol",
        "src/TokenizingVault.sol",
    )
    assert "import " not in vault_flat.text
    assert vault_flat.text.index("contract ERC20 {") < vault_flat.text.index(
        "contract TokenizingVault"
    )


def test_flatten_keeps_entry_pragma_only(etherbank_flat: FlattenedSource) -> None:
    assert etherbank_flat.text.count("pragma solidity") == 1
    assert etherbank_flat.text.count("SPDX-License-Identifier") == 1
    assert etherbank_flat.included_files[-1] == "src/EtherBank.sol"


def test_flatten_puts_entry_header_first(etherbank_flat: FlattenedSource) -> None:
    lines = etherbank_flat.text.splitlines()
    assert lines[:2] == ["// SPDX-License-Identifier: MIT", "pragma solidity ^0.8.0;"]
    assert origin_of(etherbank_flat, 0) == ("src/EtherBank.sol", 0)
    assert etherbank_flat.text.index("pragma solidity") < etherbank_flat.text.index("contract Ownable")


def test_origin_map_covers_text(vault_flat: FlattenedSource, vault_root: Path) -> None:
    spans = vault_flat.origin_map
    assert spans[0].text_start == 0
    assert spans[-1].text_end == len(vault_flat.text)
    for previous, current in zip(spans, spans[1:]):
        assert previous.text_end == current.text_start

    offset = vault_flat.text.index("function redeem")
    path, source_offset = origin_of(vault_flat, offset)
    original = (vault_root / path).read_text(encoding="utf-8")
    assert path == "src/TokenizingVault.sol"
    assert original[source_offset:].startswith("function redeem")


def test_origin_of_out_of_range(vault_flat: FlattenedSource) -> None:
    with pytest.raises(ValueError, match="outside"):
        origin_of(vault_flat, len(vault_flat.text))


def test_flatten_is_deterministic(vault_root: Path) -> None:
    remappings = read_remappings(vault_root / "remappings.txt")
    first = flatten(load_project(vault_root, "src/TokenizingVault.sol", remappings))
    second = flatten(load_project(vault_root, "src/TokenizingVault.sol", remappings))
    assert first == second


def test_flattened_file_round_trip(vault_flat: FlattenedSource, tmp_path: Path) -> None:
    target = write_flattened(vault_flat, tmp_path / "flattened.sol")
    assert read_flattened(target) == vault_flat


def test_flatten_duplicate_contract(tmp_path: Path) -> None:
    _write(
        tmp_path,
        {
            "Main.sol": 'import "./A.sol";\nimport "./B.sol";\ncontract Main {}\n',
            "A.sol": "contract Token {}\n",
            "B.sol": "contract Token {}\n",
        },
    )
    with pytest.raises(DuplicateContractError, match="Token"):
        flatten(load_project(tmp_path, "Main.sol"))


def test_flatten_breaks_import_cycles(tmp_path: Path) -> None:
    _write(
        tmp_path,
        {
            "Main.sol": 'import "./A.sol";\ncontract Main {}\n',
            "A.sol": 'import "./B.sol";\ncontract A {}\n',
            "B.sol": 'import "./A.sol";\ncontract B {}\n',
        },
    )
    result = flatten(load_project(tmp_path, "Main.sol"))
    assert result.included_files == ("B.sol", "A.sol", "Main.sol")
