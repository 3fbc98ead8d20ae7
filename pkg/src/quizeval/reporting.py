"""Aggregation of the run's analyses into one versioned report, plus the
derived fine-tuning requirements and the exporters.

A requirement (WeakPath) is a machine-derived pointer at a place where
failures concentrate: a tag seen only on failures, a tag with enough
failures to matter, a high-degree node in the failure-branch graph, or a
failure branch that is denser than the success branch. Every evidence
number in a WeakPath also appears in the report's own tables.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .evaluator import RunTranscript, ScoreSummary, score
from .ima import IMAReport, analyze_images, ima_rows
from .kg import EntityGraph, GraphMetrics, build_graph, compute_metrics
from .ner import EntityRecord, entity_frequencies

REPORT_SCHEMA_VERSION = 1
DEFAULT_TAG_THRESHOLD = 2
DEFAULT_TOP_K = 5

KIND_TAG_CONCENTRATION = "TagConcentration"
KIND_INCORRECT_ONLY_TAG = "IncorrectOnlyTag"
KIND_HIGH_DEGREE_FAILURE = "HighDegreeFailureEntity"
KIND_DENSE_FAILURE_CLUSTER = "DenseFailureCluster"


class RunMismatchError(Exception):
    """The inputs to build_report do not come from the same run."""


@dataclass(frozen=True)
class WeakPath:
    kind: str
    subject: str
    evidence: Mapping[str, float | int]


@dataclass(frozen=True)
class AnalysisReport:
    run: dict
    scores: ScoreSummary
    ima: IMAReport
    entity_freq: dict[str, dict[str, dict[str, int]]]
    correct_graph: EntityGraph
    incorrect_graph: EntityGraph
    correct_metrics: GraphMetrics
    incorrect_metrics: GraphMetrics
    requirements: tuple[WeakPath, ...]
    schema_version: int = REPORT_SCHEMA_VERSION


def _r4(value: float | None) -> float | None:
    return None if value is None else round(value, 4)


def _check_same_run(
    transcript: RunTranscript, ima_report: IMAReport, records: list[EntityRecord]
) -> None:
    if analyze_images(transcript) != ima_report:
        raise RunMismatchError("tag report does not match the transcript's verdicts")
    count = len(transcript.verdicts)
    for record in records:
        if not (0 <= record.group < count):
            raise RunMismatchError(f"entity record group {record.group} is outside the run")
        if record.from_correct != transcript.verdicts[record.group].is_correct:
            raise RunMismatchError(
                f"entity record in group {record.group} disagrees with that verdict's correctness"
            )


def _check_metrics_match(branch: str, graph: EntityGraph, provided: GraphMetrics) -> None:
    fresh = compute_metrics(graph, k=max(1, len(provided.top_degree) or 1))
    same_density = (
        fresh.density is None
        and provided.density is None
        or (
            fresh.density is not None
            and provided.density is not None
            and math.isclose(fresh.density, provided.density, abs_tol=1e-9)
        )
    )
    if (
        fresh.node_count != provided.node_count
        or fresh.edge_count != provided.edge_count
        or fresh.component_count != provided.component_count
        or not same_density
    ):
        raise RunMismatchError(f"{branch}-branch metrics do not match the entity records")


def derive_requirements(
    ima_report: IMAReport,
    incorrect_graph: EntityGraph,
    correct_metrics: GraphMetrics,
    incorrect_metrics: GraphMetrics,
    *,
    tag_threshold: int = DEFAULT_TAG_THRESHOLD,
    top_k: int = DEFAULT_TOP_K,
) -> tuple[WeakPath, ...]:
    """Derive the requirement list (a pure function of the report tables)."""
    paths: list[WeakPath] = []
    for tag in sorted(ima_report.incorrect_only_tags):
        paths.append(
            WeakPath(
                kind=KIND_INCORRECT_ONLY_TAG,
                subject=tag,
                evidence={
                    "incorrect": ima_report.incorrect_hist[tag],
                    "correct": 0,
                    "error_rate": _r4(ima_report.per_tag_error_rate[tag]),
                },
            )
        )
    concentrated = sorted(
        ((tag, n) for tag, n in ima_report.incorrect_hist.items() if n >= tag_threshold),
        key=lambda kv: (-kv[1], kv[0]),
    )
    for tag, n in concentrated:
        paths.append(
            WeakPath(
                kind=KIND_TAG_CONCENTRATION,
                subject=tag,
                evidence={
                    "incorrect": n,
                    "correct": ima_report.correct_hist.get(tag, 0),
                    "error_rate": _r4(ima_report.per_tag_error_rate[tag]),
                },
            )
        )
    from .kg import top_degree as _top_degree

    if incorrect_graph.nodes:
        for name, degree in _top_degree(incorrect_graph, top_k):
            paths.append(
                WeakPath(kind=KIND_HIGH_DEGREE_FAILURE, subject=name, evidence={"degree": degree})
            )
    if (
        correct_metrics.density is not None
        and incorrect_metrics.density is not None
        and incorrect_metrics.density > correct_metrics.density
    ):
        paths.append(
            WeakPath(
                kind=KIND_DENSE_FAILURE_CLUSTER,
                subject="incorrect-branch",
                evidence={
                    "incorrect_density": _r4(incorrect_metrics.density),
                    "correct_density": _r4(correct_metrics.density),
                },
            )
        )
    return tuple(paths)


def build_report(
    transcript: RunTranscript,
    ima_report: IMAReport,
    entity_records: list[EntityRecord],
    correct_metrics: GraphMetrics,
    incorrect_metrics: GraphMetrics,
    *,
    tag_threshold: int = DEFAULT_TAG_THRESHOLD,
    top_k: int = DEFAULT_TOP_K,
) -> AnalysisReport:
    """Assemble the full analysis report for one run.

    The branch graphs are rebuilt here from the entity records (they are
    part of the report so exports and reloads are self-contained); the
    caller's metrics are cross-checked against them and a RunMismatchError
    is raised when any input belongs to a different run.
    """
    _check_same_run(transcript, ima_report, entity_records)
    correct_graph = build_graph([r for r in entity_records if r.from_correct])
    incorrect_graph = build_graph([r for r in entity_records if not r.from_correct])
    _check_metrics_match("correct", correct_graph, correct_metrics)
    _check_metrics_match("incorrect", incorrect_graph, incorrect_metrics)

    types = sorted({r.entity_type for r in entity_records})
    entity_freq = {
        "correct": {t: entity_frequencies(entity_records, t, True) for t in types},
        "incorrect": {t: entity_frequencies(entity_records, t, False) for t in types},
    }
    requirements = derive_requirements(
        ima_report,
        incorrect_graph,
        correct_metrics,
        incorrect_metrics,
        tag_threshold=tag_threshold,
        top_k=top_k,
    )
    return AnalysisReport(
        run=asdict(transcript.run),
        scores=score(transcript),
        ima=ima_report,
        entity_freq=entity_freq,
        correct_graph=correct_graph,
        incorrect_graph=incorrect_graph,
        correct_metrics=correct_metrics,
        incorrect_metrics=incorrect_metrics,
        requirements=requirements,
    )


def _graph_to_obj(graph: EntityGraph) -> dict:
    return {
        "nodes": [
            {"name": n, "entity_type": graph.node_types.get(n, "")} for n in sorted(graph.nodes)
        ],
        "edges": [
            {"source": a, "target": b, "count": graph.edge_counts.get((a, b), 1)}
            for a, b in sorted(graph.edges)
        ],
    }


def _graph_from_obj(obj: dict) -> EntityGraph:
    node_types = {n["name"]: n["entity_type"] for n in obj["nodes"] if n.get("entity_type")}
    edges = {(e["source"], e["target"]) for e in obj["edges"]}
    counts = {(e["source"], e["target"]): e.get("count", 1) for e in obj["edges"]}
    return EntityGraph(
        nodes=frozenset(n["name"] for n in obj["nodes"]),
        edges=frozenset(edges),
        directed=False,
        node_types=node_types,
        edge_counts=counts,
    )


def _metrics_to_obj(metrics: GraphMetrics) -> dict:
    return {
        "nodes": metrics.node_count,
        "edges": metrics.edge_count,
        "density": _r4(metrics.density),
        "components": metrics.component_count,
        "top_degree": [[name, deg] for name, deg in metrics.top_degree],
    }


def _metrics_from_obj(obj: dict) -> GraphMetrics:
    return GraphMetrics(
        node_count=obj["nodes"],
        edge_count=obj["edges"],
        density=obj["density"],
        component_count=obj["components"],
        top_degree=tuple((name, deg) for name, deg in obj["top_degree"]),
    )


def report_to_dict(report: AnalysisReport) -> dict:
    """Serializable form: stable key order, floats fixed to 4 decimals."""
    return {
        "schema_version": report.schema_version,
        "run": dict(report.run),
        "scores": {
            "per_quiz": [asdict(s) for s in report.scores.per_quiz],
            "correct": report.scores.correct,
            "total": report.scores.total,
            "ratio": _r4(report.scores.ratio),
        },
        "ima": {
            "correct": dict(report.ima.correct_hist),
            "incorrect": dict(report.ima.incorrect_hist),
            "incorrect_only_tags": sorted(report.ima.incorrect_only_tags),
            "error_rate": {t: _r4(r) for t, r in report.ima.per_tag_error_rate.items()},
        },
        "entity_frequencies": report.entity_freq,
        "graphs": {
            "correct": _graph_to_obj(report.correct_graph),
            "incorrect": _graph_to_obj(report.incorrect_graph),
        },
        "metrics": {
            "correct": _metrics_to_obj(report.correct_metrics),
            "incorrect": _metrics_to_obj(report.incorrect_metrics),
        },
        "requirements": [
            {"kind": w.kind, "subject": w.subject, "evidence": dict(w.evidence)}
            for w in report.requirements
        ],
    }


def report_from_dict(doc: dict) -> AnalysisReport:
    if not isinstance(doc, dict) or doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ValueError(f"not a version-{REPORT_SCHEMA_VERSION} report document")
    from .evaluator import QuizScore

    scores = ScoreSummary(
        per_quiz=tuple(QuizScore(**s) for s in doc["scores"]["per_quiz"]),
        correct=doc["scores"]["correct"],
        total=doc["scores"]["total"],
        ratio=doc["scores"]["ratio"],
    )
    ima_doc = doc["ima"]
    ima_report = IMAReport(
        correct_hist=dict(ima_doc["correct"]),
        incorrect_hist=dict(ima_doc["incorrect"]),
        incorrect_only_tags=frozenset(ima_doc["incorrect_only_tags"]),
        per_tag_error_rate=dict(ima_doc["error_rate"]),
    )
    return AnalysisReport(
        run=dict(doc["run"]),
        scores=scores,
        ima=ima_report,
        entity_freq=doc["entity_frequencies"],
        correct_graph=_graph_from_obj(doc["graphs"]["correct"]),
        incorrect_graph=_graph_from_obj(doc["graphs"]["incorrect"]),
        correct_metrics=_metrics_from_obj(doc["metrics"]["correct"]),
        incorrect_metrics=_metrics_from_obj(doc["metrics"]["incorrect"]),
        requirements=tuple(
            WeakPath(kind=w["kind"], subject=w["subject"], evidence=dict(w["evidence"]))
            for w in doc["requirements"]
        ),
    )


def _write_atomic_text(text: str, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    return path


def _write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(list(row))
    os.replace(tmp, path)
    return path


def export(report: AnalysisReport, format: str, destination: str | Path) -> list[Path]:
    """Write the report in one format under ``destination``.

    Formats: "json" (lossless round-trip), "csv-bundle" (one file per
    table), "dot" and "graphml" (one file per branch graph). All writes are
    atomic (temp file + rename).
    """
    from .kg import graph_to_dot, graph_to_graphml

    destination = Path(destination)
    written: list[Path] = []
    if format == "json":
        text = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
        written.append(_write_atomic_text(text, destination / "report.json"))
    elif format == "csv-bundle":
        summary = report.scores
        score_rows = [[s.quiz_id, s.correct, s.total, _r4(s.correct / s.total if s.total else 0.0)] for s in summary.per_quiz]
        score_rows.append(["TOTAL", summary.correct, summary.total, _r4(summary.ratio)])
        written.append(_write_csv(destination / "scores.csv", ["quiz_id", "correct", "total", "ratio"], score_rows))
        written.append(
            _write_csv(
                destination / "ima.csv",
                ["tag", "correct", "incorrect", "error_rate"],
                [(t, c, i, _r4(r)) for t, c, i, r in ima_rows(report.ima)],
            )
        )
        freq_rows = [
            (branch, entity_type, name, count)
            for branch in ("correct", "incorrect")
            for entity_type, names in sorted(report.entity_freq.get(branch, {}).items())
            for name, count in names.items()
        ]
        written.append(
            _write_csv(
                destination / "entity_frequencies.csv",
                ["branch", "entity_type", "entity_name", "groups"],
                freq_rows,
            )
        )
        metric_rows = []
        for branch, metrics in (("correct", report.correct_metrics), ("incorrect", report.incorrect_metrics)):
            top = ";".join(f"{name}:{deg}" for name, deg in metrics.top_degree)
            metric_rows.append(
                [branch, metrics.node_count, metrics.edge_count, _r4(metrics.density), metrics.component_count, top]
            )
        written.append(
            _write_csv(
                destination / "graph_metrics.csv",
                ["branch", "nodes", "edges", "density", "components", "top_degree"],
                metric_rows,
            )
        )
        written.append(
            _write_csv(
                destination / "requirements.csv",
                ["kind", "subject", "evidence"],
                [(w.kind, w.subject, json.dumps(dict(w.evidence), sort_keys=True)) for w in report.requirements],
            )
        )
    elif format == "dot":
        written.append(
            _write_atomic_text(graph_to_dot(report.correct_graph, "correct_branch"), destination / "correct_graph.dot")
        )
        written.append(
            _write_atomic_text(
                graph_to_dot(report.incorrect_graph, "incorrect_branch"), destination / "incorrect_graph.dot"
            )
        )
    elif format == "graphml":
        written.append(_write_atomic_text(graph_to_graphml(report.correct_graph), destination / "correct_graph.graphml"))
        written.append(
            _write_atomic_text(graph_to_graphml(report.incorrect_graph), destination / "incorrect_graph.graphml")
        )
    else:
        raise ValueError(f"unknown export format {format!r}")
    return written


def load_report(path: str | Path) -> AnalysisReport:
    with open(path, encoding="utf-8") as handle:
        return report_from_dict(json.load(handle))
