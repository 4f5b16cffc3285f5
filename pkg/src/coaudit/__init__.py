"""Co-auditing toolkit for Solidity smart contracts."""

from coaudit.auditing.gateway import Cassette
from coaudit.auditing.gateway import Gateway
from coaudit.auditing.gateway import LiveBackend
from coaudit.auditing.gateway import LlmRequest
from coaudit.auditing.prompts import load_catalog
from coaudit.auditing.prompts import plan_audit
from coaudit.auditing.prompts import render_caq
from coaudit.auditing.prompts import render_cwe
from coaudit.auditing.reports import assemble_report
from coaudit.auditing.responses import parse_response
from coaudit.auditing.taxonomy import Taxonomy
from coaudit.config import RunConfig
from coaudit.config import load_config
from coaudit.evaluation.annotations import summarize_annotations
from coaudit.evaluation.groundtruth import resolve_ground_truth
from coaudit.evaluation.matching import indicate_merge
from coaudit.evaluation.matching import match_findings
from coaudit.evaluation.statistics import chi_sq_sf
from coaudit.evaluation.statistics import cohens_d
from coaudit.evaluation.statistics import cohens_kappa
from coaudit.evaluation.statistics import detection_rate
from coaudit.evaluation.statistics import mcnemar
from coaudit.evaluation.statistics import precision_recall_f1
from coaudit.evaluation.stats_report import render_stats_report
from coaudit.pipeline import run_pipeline
from coaudit.scoping.callgraph import build_fcg
from coaudit.scoping.callgraph import reachable_set
from coaudit.scoping.ccl import generate_all_ccls
from coaudit.scoping.ccl import generate_ccl
from coaudit.scoping.ingest import flatten
from coaudit.scoping.ingest import load_project
from coaudit.scoping.parser import extract_call_sites
from coaudit.scoping.parser import extract_functions
from coaudit.scoping.parser import parse

__all__ = [
    "load_project",
    "flatten",
    "parse",
    "extract_functions",
    "extract_call_sites",
    "build_fcg",
    "reachable_set",
    "generate_ccl",
    "generate_all_ccls",
    "load_catalog",
    "render_caq",
    "render_cwe",
    "plan_audit",
    "LlmRequest",
    "Cassette",
    "Gateway",
    "LiveBackend",
    "Taxonomy",
    "parse_response",
    "assemble_report",
    "resolve_ground_truth",
    "indicate_merge",
    "match_findings",
    "detection_rate",
    "mcnemar",
    "chi_sq_sf",
    "cohens_d",
    "precision_recall_f1",
    "cohens_kappa",
    "summarize_annotations",
    "render_stats_report",
    "RunConfig",
    "load_config",
    "run_pipeline",
]
