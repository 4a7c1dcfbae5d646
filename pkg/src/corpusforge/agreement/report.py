"""Corpus-level reporting: type histograms, per-document progress, and
pairwise agreement statistics, exportable as tab-separated tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .._util import now_iso
from ..errors import ValidationError
from ..model import Annotation, Document, Relation, Workspace
from .levels import MatchLevel
from .matching import match_sets
from .scores import relation_match_count, score_from_counts


@dataclass
class PairAgreement:
    annotator_x: str
    annotator_y: str
    # level name -> aggregate over all shared documents
    scores: dict[str, float] = field(default_factory=dict)
    match_counts: dict[str, int] = field(default_factory=dict)
    relation_scores: dict[str, float] = field(default_factory=dict)
    per_document: dict[str, dict[str, float]] = field(default_factory=dict)
    size_x: int = 0
    size_y: int = 0

    def to_json(self) -> dict:
        return {
            "annotator_x": self.annotator_x,
            "annotator_y": self.annotator_y,
            "scores": dict(self.scores),
            "match_counts": dict(self.match_counts),
            "relation_scores": dict(self.relation_scores),
            "per_document": {d: dict(v) for d, v in self.per_document.items()},
            "size_x": self.size_x,
            "size_y": self.size_y,
        }


@dataclass
class AgreementReport:
    pairs: list[PairAgreement] = field(default_factory=list)
    generated_at: str = field(default_factory=now_iso)

    def to_json(self) -> dict:
        return {
            "generated_at": self.generated_at,
            "pairs": [p.to_json() for p in self.pairs],
        }


def build_agreement_report(
    sets_by_doc: dict[str, dict[str, tuple[list[Annotation], list[Relation]]]],
) -> AgreementReport:
    """sets_by_doc: doc_id -> annotator -> (annotations, relations).

    Produces one PairAgreement per unordered annotator pair sharing at
    least one document, with per-level entity scores (aggregated F1-style
    across the shared documents), relation scores, and a per-document
    breakdown.
    """
    annotators = sorted({u for per_doc in sets_by_doc.values() for u in per_doc})
    report = AgreementReport()
    for x, y in combinations(annotators, 2):
        shared = [d for d, per in sorted(sets_by_doc.items()) if x in per and y in per]
        if not shared:
            continue
        pair = PairAgreement(annotator_x=x, annotator_y=y)
        pair.size_x = sum(len(sets_by_doc[d][x][0]) for d in shared)
        pair.size_y = sum(len(sets_by_doc[d][y][0]) for d in shared)
        for level in sorted(MatchLevel, key=lambda l: -l.rank):
            matched = 0
            total = 0
            rel_matched = 0
            rel_total = 0
            for doc_id in shared:
                anns_x, rels_x = sets_by_doc[doc_id][x]
                anns_y, rels_y = sets_by_doc[doc_id][y]
                m = match_sets(anns_x, anns_y, level, doc_id, doc_id)
                matched += len(m.pairs)
                total += len(anns_x) + len(anns_y)
                doc_score = score_from_counts(len(m.pairs), len(anns_x), len(anns_y))
                pair.per_document.setdefault(doc_id, {})[level.name] = doc_score
                rel_matched += relation_match_count(rels_x, rels_y, m, doc_id)
                rel_total += len(rels_x) + len(rels_y)
            pair.match_counts[level.name] = matched
            pair.scores[level.name] = score_from_counts(matched, total // 2, total - total // 2)
            pair.relation_scores[level.name] = score_from_counts(
                rel_matched, rel_total // 2, rel_total - rel_total // 2
            )
        report.pairs.append(pair)
    return report


# ---------------------------------------------------------------------------
# Whole-corpus report


@dataclass
class CorpusReport:
    entity_types: dict[str, dict] = field(default_factory=dict)
    relation_types: dict[str, dict] = field(default_factory=dict)
    documents: list[dict] = field(default_factory=list)
    agreement: AgreementReport = field(default_factory=AgreementReport)
    round_number: int | None = None
    generated_at: str = field(default_factory=now_iso)

    def to_json(self) -> dict:
        return {
            "generated_at": self.generated_at,
            "round_number": self.round_number,
            "entity_types": self.entity_types,
            "relation_types": self.relation_types,
            "documents": self.documents,
            "agreement": self.agreement.to_json(),
        }


def corpus_report(
    documents: list[Document],
    workspaces_by_doc: dict[str, list[Workspace]],
    round_number: int | None = None,
) -> CorpusReport:
    """Aggregate statistics over one round's workspaces.

    Per entity type: total count, distinct surface forms, distinct concept
    ids.  Per relation type: total count.  Per (document, owner): counts
    and completion status.  Plus the full pairwise agreement report.
    """
    if not documents:
        raise ValidationError("corpus report requires at least one document")
    report = CorpusReport(round_number=round_number)

    ent: dict[str, dict] = {}
    rel: dict[str, dict] = {}
    for doc in documents:
        for ws in workspaces_by_doc.get(doc.doc_id, []):
            for ann in ws.annotations.values():
                bucket = ent.setdefault(
                    ann.entity_type, {"count": 0, "surfaces": set(), "concepts": set()}
                )
                bucket["count"] += 1
                bucket["surfaces"].add(ann.surface_text)
                if ann.concept_id:
                    bucket["concepts"].add(ann.concept_id)
            for r in ws.relations.values():
                bucket = rel.setdefault(r.relation_type, {"count": 0})
                bucket["count"] += 1
            report.documents.append(
                {
                    "doc_id": doc.doc_id,
                    "owner": ws.owner,
                    "annotation_count": ws.status.annotation_count,
                    "relation_count": ws.status.relation_count,
                    "triage_label": ws.status.triage_label,
                    "done": ws.status.done,
                    "last_update": ws.status.last_update,
                }
            )
    report.entity_types = {
        t: {
            "count": b["count"],
            "distinct_surfaces": len(b["surfaces"]),
            "distinct_concepts": len(b["concepts"]),
        }
        for t, b in sorted(ent.items())
    }
    report.relation_types = {t: {"count": b["count"]} for t, b in sorted(rel.items())}

    sets_by_doc: dict[str, dict[str, tuple[list, list]]] = {}
    for doc in documents:
        per_owner = {}
        for ws in workspaces_by_doc.get(doc.doc_id, []):
            per_owner[ws.owner] = (ws.annotation_list(), ws.relation_list())
        if len(per_owner) >= 2:
            sets_by_doc[doc.doc_id] = per_owner
    report.agreement = build_agreement_report(sets_by_doc)
    return report


# ---------------------------------------------------------------------------
# Tab-separated export


def report_to_tsv(report: CorpusReport) -> str:
    """One machine-readable table per section, tab-separated."""
    lines: list[str] = []

    lines.append("# entity_types")
    lines.append("entity_type\tcount\tdistinct_surfaces\tdistinct_concepts")
    for t, b in report.entity_types.items():
        lines.append(f"{t}\t{b['count']}\t{b['distinct_surfaces']}\t{b['distinct_concepts']}")

    lines.append("")
    lines.append("# relation_types")
    lines.append("relation_type\tcount")
    for t, b in report.relation_types.items():
        lines.append(f"{t}\t{b['count']}")

    lines.append("")
    lines.append("# documents")
    lines.append("doc_id\towner\tannotation_count\trelation_count\ttriage_label\tdone\tlast_update")
    for row in report.documents:
        lines.append(
            "\t".join(
                str(row[k]) if row[k] is not None else ""
                for k in (
                    "doc_id", "owner", "annotation_count", "relation_count",
                    "triage_label", "done", "last_update",
                )
            )
        )

    lines.append("")
    lines.append("# agreement")
    lines.append("annotator_x\tannotator_y\tlevel\tscore\tmatches\trelation_score")
    for pair in report.agreement.pairs:
        for level in sorted(MatchLevel, key=lambda l: -l.rank):
            lines.append(
                f"{pair.annotator_x}\t{pair.annotator_y}\t{level.name.lower()}\t"
                f"{pair.scores[level.name]:.3f}\t{pair.match_counts[level.name]}\t"
                f"{pair.relation_scores[level.name]:.3f}"
            )
    return "\n".join(lines) + "\n"
