"""Pipeline stages with file-based hand-off.

Every stage reads the artifact of the stage before it from the output
directory and writes its own next to it:

=====================  ===============================================
stage                  artifacts
=====================  ===============================================
flatten                flattened.sol, flattened.origins.csv
graph                  callgraph.txt, callgraph.dot, declarations.jsonl
ccl                    ccls.jsonl
prompt                 plan.jsonl
audit                  exchanges.jsonl, findings.jsonl, report_<contract>.<ext>
eval                   eval/<run_label>.csv
stats                  stats.md, stats.json
annotate-summarize     annotations_summary.csv, annotations_agreement.json
=====================  ===============================================
"""

import json
import logging
from collections.abc import Callable
from pathlib import Path

from coaudit.auditing.gateway import Cassette
from coaudit.auditing.gateway import Gateway
from coaudit.auditing.gateway import LiveBackend
from coaudit.auditing.gateway import read_exchanges
from coaudit.auditing.gateway import write_exchanges
from coaudit.auditing.prompts import load_catalog
from coaudit.auditing.prompts import plan_audit
from coaudit.auditing.prompts import read_plan
from coaudit.auditing.prompts import write_plan
from coaudit.auditing.reports import assemble_report
from coaudit.auditing.reports import read_findings
from coaudit.auditing.reports import write_findings
from coaudit.auditing.responses import AuditFinding
from coaudit.auditing.responses import parse_response
from coaudit.auditing.taxonomy import Taxonomy
from coaudit.config import RunConfig
from coaudit.errors import ConfigError
from coaudit.errors import StageInputMissingError
from coaudit.evaluation.annotations import annotation_agreement
from coaudit.evaluation.annotations import read_annotations
from coaudit.evaluation.annotations import summarize_annotations
from coaudit.evaluation.groundtruth import ground_truth_counts
from coaudit.evaluation.groundtruth import read_ground_truth
from coaudit.evaluation.groundtruth import resolve_ground_truth
from coaudit.evaluation.matching import match_findings
from coaudit.evaluation.matching import read_outcomes
from coaudit.evaluation.matching import write_outcomes
from coaudit.evaluation.stats_report import compare_results
from coaudit.evaluation.stats_report import detection_table
from coaudit.evaluation.stats_report import render_stats_report
from coaudit.evaluation.stats_report import run_scores
from coaudit.evaluation.stats_report import stats_document
from coaudit.scoping.callgraph import build_fcg
from coaudit.scoping.callgraph import read_adjacency
from coaudit.scoping.callgraph import to_dot
from coaudit.scoping.callgraph import write_adjacency
from coaudit.scoping.ccl import generate_all_ccls
from coaudit.scoping.ccl import read_ccls
from coaudit.scoping.ccl import write_ccls
from coaudit.scoping.ingest import Project
from coaudit.scoping.ingest import flatten
from coaudit.scoping.ingest import load_project
from coaudit.scoping.ingest import origin_sidecar
from coaudit.scoping.ingest import read_flattened
from coaudit.scoping.ingest import read_remappings
from coaudit.scoping.ingest import write_flattened
from coaudit.scoping.parser import dump_declarations
from coaudit.scoping.parser import parse

logger = logging.getLogger(__name__)

STAGES = ("flatten", "graph", "ccl", "prompt", "audit", "eval", "stats", "annotate-summarize")

FLATTENED = "flattened.sol"
ADJACENCY = "callgraph.txt"
CCLS = "ccls.jsonl"
PLAN = "plan.jsonl"
EXCHANGES = "exchanges.jsonl"
FINDINGS = "findings.jsonl"
EVAL_DIR = "eval"
REPORT_EXTENSIONS = {"csv": "csv", "markdown": "md", "json": "json"}


def _require(config: RunConfig, stage: str, *keys: str) -> None:
    missing = [key for key in keys if getattr(config, key) is None]
    if missing:
        raise ConfigError(f"Stage '{stage}' needs the config key(s): {', '.join(missing)}")


def _input(config: RunConfig, stage: str, name: str, producer: str) -> Path:
    path = config.output / name
    if not path.exists():
        raise StageInputMissingError(
            f"Stage '{stage}' needs {path}, run the '{producer}' stage first"
        )
    return path


def _existing(path: Path | None, stage: str, key: str) -> Path | None:
    if path is not None and not path.exists():
        raise ConfigError(f"Stage '{stage}': {key} {path} does not exist")
    return path


def _taxonomy(config: RunConfig, stage: str) -> Taxonomy:
    return Taxonomy.load(_existing(config.taxonomy, stage, "taxonomy"))


def _load_project(config: RunConfig, stage: str) -> Project:
    _require(config, stage, "project_root", "entry")
    remappings_file = _existing(config.remappings, stage, "remappings")
    remappings = read_remappings(remappings_file) if remappings_file else None
    return load_project(config.project_root, config.entry, remappings)  # type: ignore[arg-type]


def stage_flatten(config: RunConfig) -> list[Path]:
    """Flatten the project of the entry file."""
    project = _load_project(config, "flatten")
    flat = flatten(project)
    target = write_flattened(flat, config.output / FLATTENED)
    return [target, origin_sidecar(target)]


def stage_graph(config: RunConfig) -> list[Path]:
    """Parse the flattened source and write the call graph."""
    flat = read_flattened(_input(config, "graph", FLATTENED, "flatten"))
    unit = parse(flat)
    graph = build_fcg(unit)
    adjacency = write_adjacency(graph, config.output / ADJACENCY)
    dot = config.output / "callgraph.dot"
    dot.write_text(to_dot(graph), encoding="utf-8")
    declarations = config.output / "declarations.jsonl"
    declarations.write_text(dump_declarations(unit), encoding="utf-8")
    return [adjacency, dot, declarations]


def stage_ccl(config: RunConfig) -> list[Path]:
    """Build one CCL per function of the audited contract."""
    flat = read_flattened(_input(config, "ccl", FLATTENED, "flatten"))
    graph = read_adjacency(_input(config, "ccl", ADJACENCY, "graph"))
    batch = generate_all_ccls(
        graph, flat, config.budget, config.contract, config.include_state_vars
    )
    for function_id, message in batch.diagnostics.items():
        logger.warning("Skipped %s: %s", function_id, message)
    return [write_ccls(batch.ccls, config.output / CCLS)]


def stage_prompt(config: RunConfig) -> list[Path]:
    """Render the prompt plan."""
    ccls = read_ccls(_input(config, "prompt", CCLS, "ccl"))
    catalog = None
    if config.mode == "CWE":
        catalog = load_catalog(_existing(config.catalog, "prompt", "catalog"))
    plan = plan_audit(ccls, config.mode, catalog)
    return [write_plan(plan, config.output / PLAN)]


def _gateway(config: RunConfig) -> Gateway:
    cassette = None
    if config.backend in ("replay", "record"):
        _require(config, "audit", "cassette")
        if config.backend == "replay":
            _existing(config.cassette, "audit", "cassette")
        cassette = Cassette.load(config.cassette, config.model_tag)  # type: ignore[arg-type]
    backend = None
    if config.backend != "replay" or not config.strict_replay:
        backend = LiveBackend(endpoint=config.endpoint, api_key_env=config.api_key_env)
    return Gateway(config.backend, cassette=cassette, backend=backend, strict=config.strict_replay)


def stage_audit(config: RunConfig) -> list[Path]:
    """Send the plan, parse the responses and write the reports."""
    plan = read_plan(_input(config, "audit", PLAN, "prompt"))
    exchanges = _gateway(config).run_plan(
        plan,
        parallelism=config.parallelism,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        model_tag=config.model_tag,
    )
    artifacts = [write_exchanges(exchanges, config.output / EXCHANGES)]

    taxonomy = _taxonomy(config, "audit")
    findings = [
        parse_response(exchange.response_text, prompt, taxonomy)
        for prompt, exchange in zip(plan, exchanges, strict=True)
    ]
    artifacts.append(write_findings(findings, config.output / FINDINGS))

    by_contract: dict[str, list[AuditFinding]] = {}
    for finding in findings:
        by_contract.setdefault(finding.contract, []).append(finding)
    function_order = list(dict.fromkeys(prompt.target for prompt in plan))
    cwe_order = list(dict.fromkeys(prompt.cwe.name for prompt in plan if prompt.cwe))
    metadata = {"model_tag": config.model_tag, "mode": config.mode, "backend": config.backend}
    extension = REPORT_EXTENSIONS[config.report_format]
    for contract, contract_findings in by_contract.items():
        report = config.output / f"report_{contract}.{extension}"
        report.write_text(
            assemble_report(
                contract_findings, config.report_format, metadata, function_order, cwe_order
            ),
            encoding="utf-8",
        )
        artifacts.append(report)
    return artifacts


def stage_eval(config: RunConfig) -> list[Path]:
    """Match the findings of this run against the ground truth."""
    _require(config, "eval", "ground_truth")
    findings = read_findings(_input(config, "eval", FINDINGS, "audit"))
    flat = read_flattened(_input(config, "eval", FLATTENED, "flatten"))
    taxonomy = _taxonomy(config, "eval")
    frame = read_ground_truth(_existing(config.ground_truth, "eval", "ground_truth"), taxonomy)  # type: ignore[arg-type]

    sources = None
    if config.project_root is not None:
        sources = {
            path: (config.project_root / path).read_text(encoding="utf-8")
            for path in flat.included_files
            if (config.project_root / path).is_file()
        }
    entries = resolve_ground_truth(frame, parse(flat), flat, sources)
    result = match_findings(findings, entries, taxonomy, config.count_not_sure)
    return [write_outcomes(result, config.output / EVAL_DIR / f"{config.run_label}.csv")]


def stage_stats(config: RunConfig) -> list[Path]:
    """Compare every evaluated run in one report."""
    eval_dir = _input(config, "stats", EVAL_DIR, "eval")
    taxonomy = _taxonomy(config, "stats")
    results = {
        path.stem: read_outcomes(path, taxonomy) for path in sorted(eval_dir.glob("*.csv"))
    }
    if not results:
        raise StageInputMissingError(f"Stage 'stats' found no run in {eval_dir}, run 'eval' first")
    first = next(iter(results.values()))
    ground_truth = ground_truth_counts(list(first.entries), taxonomy.categories)

    comparisons = []
    for label_a, label_b in config.comparisons:
        for label in (label_a, label_b):
            if label not in results:
                raise ConfigError(f"Comparison names run '{label}', which has no file in {eval_dir}")
        comparisons.append(
            compare_results(label_a, results[label_a], label_b, results[label_b], ground_truth)
        )

    table = detection_table({label: r.counts for label, r in results.items()}, ground_truth)
    scores = {label: run_scores(result) for label, result in results.items()}
    markdown = config.output / "stats.md"
    markdown.write_text(render_stats_report(table, comparisons, scores), encoding="utf-8")
    document = config.output / "stats.json"
    document.write_text(
        json.dumps(stats_document(table, comparisons, scores), indent=2) + "\n", encoding="utf-8"
    )
    return [markdown, document]


def stage_annotate_summarize(config: RunConfig) -> list[Path]:
    """Summarize human annotations of the generated reports."""
    _require(config, "annotate-summarize", "annotations")
    records = read_annotations(_existing(config.annotations, "annotate-summarize", "annotations"))  # type: ignore[arg-type]
    config.output.mkdir(parents=True, exist_ok=True)
    summary = config.output / "annotations_summary.csv"
    summarize_annotations(records).to_csv(summary, index=False, lineterminator="\n")
    agreement = config.output / "annotations_agreement.json"
    agreement.write_text(json.dumps(annotation_agreement(records), indent=2) + "\n", encoding="utf-8")
    return [summary, agreement]


_STAGE_FUNCTIONS: dict[str, Callable[[RunConfig], list[Path]]] = {
    "flatten": stage_flatten,
    "graph": stage_graph,
    "ccl": stage_ccl,
    "prompt": stage_prompt,
    "audit": stage_audit,
    "eval": stage_eval,
    "stats": stage_stats,
    "annotate-summarize": stage_annotate_summarize,
}


def run_pipeline(config: RunConfig, stage: str) -> list[Path]:
    """Run one stage, or every stage in order for 'all'.

    With 'all', evaluation and statistics are skipped without a ground truth
    and the annotation summary without annotation records.

    Args:
        config: The run configuration.
        stage: A stage name or 'all'.

    Returns:
        Paths of the written artifacts.

    Raises:
        ConfigError: If the stage is unknown or its configuration incomplete.
        StageInputMissingError: If an earlier stage has not been run.
    """
    if stage == "all":
        stages = list(STAGES[:5])
        if config.ground_truth is not None:
            stages += ["eval", "stats"]
        if config.annotations is not None:
            stages.append("annotate-summarize")
    elif stage in _STAGE_FUNCTIONS:
        stages = [stage]
    else:
        raise ConfigError(f"Unknown stage '{stage}', expected one of: {', '.join(STAGES)}, all")

    config.output.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for name in stages:
        logger.info("Running stage '%s'", name)
        artifacts.extend(_STAGE_FUNCTIONS[name](config))
    return artifacts


def replay_summary(config: RunConfig) -> dict[str, int]:
    """Count live, replayed and failed exchanges of the last audit stage."""
    exchanges = read_exchanges(_input(config, "summary", EXCHANGES, "audit"))
    return {
        "live": sum(e.source == "live" and e.error is None for e in exchanges),
        "replay": sum(e.source == "replay" and e.error is None for e in exchanges),
        "failed": sum(e.error is not None for e in exchanges),
    }
