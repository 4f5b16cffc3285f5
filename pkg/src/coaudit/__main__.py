"""Command-line interface."""

import logging
from pathlib import Path
from typing import Any

import click

from coaudit.config import load_config
from coaudit.errors import CoAuditError
from coaudit.pipeline import STAGES
from coaudit.pipeline import replay_summary
from coaudit.pipeline import run_pipeline


@click.group()
@click.version_option(package_name="coaudit-toolkit")
@click.option("--verbose", "-v", is_flag=True, help="Log debug messages.")
def main(verbose: bool) -> None:
    """Co-audit Solidity contracts with a language model."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.argument("stage", metavar=f"[{'|'.join((*STAGES, 'all'))}]")
@click.option("--config", "config_file", type=click.Path(dir_okay=False, path_type=Path), help="Config file with key = value lines.")
@click.option("--project-root", type=click.Path(file_okay=False, path_type=Path))
@click.option("--entry", help="Main contract file, relative to the project root.")
@click.option("--remappings", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--contract", help="Contract to audit.")
@click.option("--budget", type=int, help="Token budget per CCL.")
@click.option("--include-state-vars/--no-include-state-vars", default=None)
@click.option("--mode", type=click.Choice(["CAQ", "CWE"], case_sensitive=False))
@click.option("--catalog", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--taxonomy", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--backend", type=click.Choice(["live", "replay", "record"]))
@click.option("--cassette", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--strict-replay/--no-strict-replay", default=None)
@click.option("--endpoint")
@click.option("--model-tag")
@click.option("--temperature", type=float)
@click.option("--max-tokens", type=int)
@click.option("--parallelism", type=int)
@click.option("--api-key-env", help="Environment variable holding the API key.")
@click.option("--report-format", type=click.Choice(["csv", "markdown", "json"]))
@click.option("--output", type=click.Path(file_okay=False, path_type=Path))
@click.option("--ground-truth", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--run-label")
@click.option("--count-not-sure/--no-count-not-sure", default=None)
@click.option("--comparisons", help="Run label pairs to compare, e.g. 'caq:cwe,full:ccl'.")
@click.option("--annotations", type=click.Path(dir_okay=False, path_type=Path))
def run(stage: str, config_file: Path | None, **flags: Any) -> None:
    """Run one pipeline STAGE, or all of them."""
    if flags.get("mode"):
        flags["mode"] = flags["mode"].upper()
    try:
        config = load_config(flags, config_file)
        artifacts = run_pipeline(config, stage)
    except CoAuditError as err:
        raise click.ClickException(f"Stage '{stage}' failed: {err}") from err

    for path in artifacts:
        click.echo(str(path))
    if stage in ("audit", "all"):
        counts = replay_summary(config)
        click.echo(
            f"Exchanges: {counts['replay']} replayed, {counts['live']} live, {counts['failed']} failed"
        )


if __name__ == "__main__":
    main(prog_name="coaudit")  # pragma: no cover
