"""Core domain model: documents, spans, annotations, relations, schemas,
workspaces, and the editing semantics every other layer builds on.

Conventions fixed here and relied on everywhere else:

* All offsets count Unicode code points over the concatenation of the
  passage texts (no separators between passages).
* A span never crosses a passage boundary; cross-passage structure is
  expressed through relations.
* Edits auto-save: there is no separate commit step.  Deleting an
  annotation cascades to every relation that references it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._util import find_occurrences, now_iso
from .errors import NotFoundError, ValidationError

SHARED_OWNER = "SHARED"

# ---------------------------------------------------------------------------
# Documents


@dataclass(frozen=True)
class Span:
    """Half-open global range [start, start+length) in code points."""

    start: int
    length: int

    @property
    def end(self) -> int:
        return self.start + self.length

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass
class Passage:
    offset: int
    text: str
    infons: dict[str, str] = field(default_factory=dict)

    @property
    def end(self) -> int:
        return self.offset + len(self.text)


@dataclass
class FigureRef:
    label: str
    caption_passage_index: int
    image_url: str | None = None


@dataclass
class Document:
    doc_id: str
    metadata: dict[str, str] = field(default_factory=dict)
    passages: list[Passage] = field(default_factory=list)
    figures: list[FigureRef] = field(default_factory=list)

    @property
    def text(self) -> str:
        return "".join(p.text for p in self.passages)

    @property
    def length(self) -> int:
        return sum(len(p.text) for p in self.passages)

    def validate(self) -> None:
        """Raise ValidationError unless the contiguity invariants hold."""
        if not self.doc_id:
            raise ValidationError("document id must be non-empty")
        expected = 0
        for i, p in enumerate(self.passages):
            if p.offset != expected:
                raise ValidationError(
                    f"document {self.doc_id}: passage {i} offset {p.offset}, "
                    f"expected {expected} (passages must be contiguous)"
                )
            expected += len(p.text)
        for fig in self.figures:
            if not fig.label:
                raise ValidationError(f"document {self.doc_id}: figure label must be non-empty")
            if not 0 <= fig.caption_passage_index < len(self.passages):
                raise ValidationError(
                    f"document {self.doc_id}: figure '{fig.label}' caption passage index "
                    f"{fig.caption_passage_index} out of range"
                )

    def passage_index_at(self, offset: int) -> int:
        """Index of the passage containing the given global offset."""
        for i, p in enumerate(self.passages):
            if p.offset <= offset < p.end:
                return i
        raise NotFoundError(f"offset {offset} outside document {self.doc_id}")

    def text_at(self, span: Span) -> str:
        return self.text[span.start : span.end]


def is_figure_passage(passage: Passage) -> bool:
    """True when the passage's section-type infons mark it as a figure caption."""
    for key in ("section", "section_type", "type"):
        value = passage.infons.get(key, "").lower()
        if value.startswith("fig"):
            return True
    return False


def derive_figures(passages: list[Passage]) -> list[FigureRef]:
    """One FigureRef per figure-caption passage, in reading order.

    The image locator comes from the passage's "file" infon when present;
    the label from "fig_label", else a sequential "Figure N".
    """
    figures = []
    for i, p in enumerate(passages):
        if not is_figure_passage(p):
            continue
        label = p.infons.get("fig_label") or f"Figure {len(figures) + 1}"
        figures.append(FigureRef(label, i, p.infons.get("file") or None))
    return figures


def validate_span(doc: Document, span: Span) -> str | None:
    """Check a span against a document.  Returns None if the span is valid,
    otherwise a description of the violated rule.  Total: never raises.
    """
    if span.length < 1:
        return f"span length must be >= 1, got {span.length}"
    if span.start < 0:
        return f"span start must be >= 0, got {span.start}"
    total = doc.length
    if span.end > total:
        return f"span [{span.start},{span.end}) out of range (document length {total})"
    for p in doc.passages:
        if p.offset <= span.start < p.end:
            if span.end > p.end:
                return (
                    f"span [{span.start},{span.end}) crosses passage boundary at {p.end}"
                )
            return None
    return f"span start {span.start} falls in no passage"


# ---------------------------------------------------------------------------
# Schema


@dataclass(frozen=True)
class EntityType:
    name: str
    display_color: str = "#ffd43b"


@dataclass(frozen=True)
class RelationType:
    """``node_types`` is the allowed multiset of node entity types, or None
    for a wildcard that admits any combination within the arity bounds."""

    name: str
    node_types: tuple[str, ...] | None = None
    min_arity: int = 2
    max_arity: int = 8


@dataclass
class AnnotationSchema:
    entity_types: list[EntityType] = field(default_factory=list)
    relation_types: list[RelationType] = field(default_factory=list)
    triage_labels: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if not self.entity_types:
            raise ValidationError("schema must define at least one entity type")
        names = [t.name for t in self.entity_types]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate entity type names in schema")
        if any(not n for n in names):
            raise ValidationError("entity type names must be non-empty")
        rnames = [r.name for r in self.relation_types]
        if len(set(rnames)) != len(rnames):
            raise ValidationError("duplicate relation type names in schema")
        for r in self.relation_types:
            if not r.name:
                raise ValidationError("relation type names must be non-empty")
            if r.min_arity < 2 or r.max_arity > 8 or r.min_arity > r.max_arity:
                raise ValidationError(
                    f"relation type '{r.name}': arity bounds must satisfy 2 <= min <= max <= 8"
                )
        if len(set(self.triage_labels)) != len(self.triage_labels):
            raise ValidationError("duplicate triage labels in schema")

    def entity_type_names(self) -> set[str]:
        return {t.name for t in self.entity_types}

    def relation_type(self, name: str) -> RelationType | None:
        for r in self.relation_types:
            if r.name == name:
                return r
        return None

    def to_json(self) -> dict:
        return {
            "entity_types": [
                {"name": t.name, "display_color": t.display_color} for t in self.entity_types
            ],
            "relation_types": [
                {
                    "name": r.name,
                    "node_types": list(r.node_types) if r.node_types is not None else None,
                    "min_arity": r.min_arity,
                    "max_arity": r.max_arity,
                }
                for r in self.relation_types
            ],
            "triage_labels": list(self.triage_labels),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AnnotationSchema":
        return cls(
            entity_types=[
                EntityType(t["name"], t.get("display_color", "#ffd43b"))
                for t in data.get("entity_types", [])
            ],
            relation_types=[
                RelationType(
                    r["name"],
                    tuple(r["node_types"]) if r.get("node_types") is not None else None,
                    r.get("min_arity", 2),
                    r.get("max_arity", 8),
                )
                for r in data.get("relation_types", [])
            ],
            triage_labels=list(data.get("triage_labels", [])),
        )


# ---------------------------------------------------------------------------
# Annotations and relations


@dataclass
class Annotation:
    ann_id: str
    span: Span
    surface_text: str
    entity_type: str
    concept_id: str | None = None
    annotator: str = ""
    updated_at: str = ""
    # Uninterpreted infons from imported files; survive round-trips untouched.
    infons: dict[str, str] = field(default_factory=dict)

    def strict_key(self) -> tuple:
        """Identity under exact agreement: span + type + concept."""
        return (self.span.start, self.span.length, self.entity_type, self.concept_id)

    def to_json(self) -> dict:
        return {
            "ann_id": self.ann_id,
            "start": self.span.start,
            "length": self.span.length,
            "surface_text": self.surface_text,
            "entity_type": self.entity_type,
            "concept_id": self.concept_id,
            "annotator": self.annotator,
            "updated_at": self.updated_at,
            "infons": dict(self.infons),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Annotation":
        return cls(
            ann_id=d["ann_id"],
            span=Span(d["start"], d["length"]),
            surface_text=d["surface_text"],
            entity_type=d["entity_type"],
            concept_id=d.get("concept_id"),
            annotator=d.get("annotator", ""),
            updated_at=d.get("updated_at", ""),
            infons=dict(d.get("infons", {})),
        )


@dataclass(frozen=True)
class RelationNode:
    ann_id: str
    role: str


@dataclass
class Relation:
    rel_id: str
    relation_type: str
    nodes: list[RelationNode]
    annotator: str = ""
    updated_at: str = ""
    infons: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "rel_id": self.rel_id,
            "relation_type": self.relation_type,
            "nodes": [{"ann_id": n.ann_id, "role": n.role} for n in self.nodes],
            "annotator": self.annotator,
            "updated_at": self.updated_at,
            "infons": dict(self.infons),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Relation":
        return cls(
            rel_id=d["rel_id"],
            relation_type=d["relation_type"],
            nodes=[RelationNode(n["ann_id"], n["role"]) for n in d["nodes"]],
            annotator=d.get("annotator", ""),
            updated_at=d.get("updated_at", ""),
            infons=dict(d.get("infons", {})),
        )


def validate_against_schema(item: Annotation | Relation, schema: AnnotationSchema) -> str | None:
    """Schema conformance check.  None when ok, else the violated constraint.

    For relations only type-level constraints are checkable here; node
    existence is a workspace concern (see add_relation).
    """
    if isinstance(item, Annotation):
        if item.entity_type not in schema.entity_type_names():
            return f"unknown entity type '{item.entity_type}'"
        return None
    rtype = schema.relation_type(item.relation_type)
    if rtype is None:
        return f"unknown relation type '{item.relation_type}'"
    n = len(item.nodes)
    if not rtype.min_arity <= n <= rtype.max_arity:
        return (
            f"relation '{item.relation_type}' has {n} nodes, allowed "
            f"{rtype.min_arity}..{rtype.max_arity}"
        )
    return None


# ---------------------------------------------------------------------------
# Workspace: one annotator's copy of one document within one round


@dataclass
class DocumentStatus:
    triage_label: str | None = None
    done: bool = False
    annotation_count: int = 0
    relation_count: int = 0
    last_update: str = ""


@dataclass
class VariantInfo:
    """A partner's conflicting version of an annotation, pseudonymously
    attributed, shown alongside a cue in review rounds."""

    partner: str
    start: int
    length: int
    entity_type: str
    concept_id: str | None
    level: str

    def to_json(self) -> dict:
        return {
            "partner": self.partner,
            "start": self.start,
            "length": self.length,
            "entity_type": self.entity_type,
            "concept_id": self.concept_id,
            "level": self.level,
        }

    @classmethod
    def from_json(cls, d: dict) -> "VariantInfo":
        return cls(d["partner"], d["start"], d["length"], d["entity_type"],
                   d.get("concept_id"), d["level"])


@dataclass
class CueFlag:
    """Agreement cue attached to one annotation.  ``cue`` is one of
    FULL_AGREEMENT / CONCEPT_MISMATCH / SPAN_PARTIAL / SINGLETON and
    ``partners`` maps pseudonym -> achieved match level (or "none")."""

    cue: str
    partners: dict[str, str] = field(default_factory=dict)
    variants: list[VariantInfo] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "cue": self.cue,
            "partners": dict(self.partners),
            "variants": [v.to_json() for v in self.variants],
        }

    @classmethod
    def from_json(cls, d: dict) -> "CueFlag":
        return cls(
            cue=d["cue"],
            partners=dict(d.get("partners", {})),
            variants=[VariantInfo.from_json(v) for v in d.get("variants", [])],
        )


@dataclass
class Workspace:
    workspace_id: str
    round_number: int
    doc_id: str
    owner: str  # user_id, or SHARED_OWNER in collaborative rounds
    annotations: dict[str, Annotation] = field(default_factory=dict)
    relations: dict[str, Relation] = field(default_factory=dict)
    status: DocumentStatus = field(default_factory=DocumentStatus)
    cue_overlay: dict[str, CueFlag] = field(default_factory=dict)

    def next_ann_id(self) -> str:
        return _next_id("A", self.annotations)

    def next_rel_id(self) -> str:
        return _next_id("R", self.relations)

    def annotation_list(self) -> list[Annotation]:
        return sorted(
            self.annotations.values(),
            key=lambda a: (a.span.start, a.span.length, a.entity_type, a.concept_id or "", a.ann_id),
        )

    def relation_list(self) -> list[Relation]:
        return sorted(self.relations.values(), key=lambda r: r.rel_id)

    def refresh_counts(self) -> None:
        self.status.annotation_count = len(self.annotations)
        self.status.relation_count = len(self.relations)
        self.status.last_update = now_iso()


def _next_id(prefix: str, existing: dict) -> str:
    n = 0
    for key in existing:
        if key.startswith(prefix) and key[len(prefix):].isdigit():
            n = max(n, int(key[len(prefix):]))
    return f"{prefix}{n + 1}"


# ---------------------------------------------------------------------------
# Editing operations (auto-save semantics: the returned workspace is the
# durable state; persistence layers write through on every call)


def _check_no_duplicate(ws: Workspace, span: Span, entity_type: str,
                        concept_id: str | None, ignore: str | None = None) -> None:
    # Overlapping and nested annotations are fine, including same-span
    # different-type; only exact (span, type, concept) duplicates are barred.
    for a in ws.annotations.values():
        if a.ann_id == ignore:
            continue
        if (a.span == span and a.entity_type == entity_type and a.concept_id == concept_id):
            raise ValidationError(
                f"duplicate annotation: span ({span.start},{span.length}) "
                f"type {entity_type} concept {concept_id!r} already present as {a.ann_id}"
            )


def add_annotation(
    ws: Workspace,
    doc: Document,
    schema: AnnotationSchema,
    span: Span,
    entity_type: str,
    concept_id: str | None = None,
    annotator: str | None = None,
    ann_id: str | None = None,
) -> Annotation:
    violation = validate_span(doc, span)
    if violation:
        raise ValidationError(violation)
    if entity_type not in schema.entity_type_names():
        raise ValidationError(f"unknown entity type '{entity_type}'")
    _check_no_duplicate(ws, span, entity_type, concept_id)
    ann = Annotation(
        ann_id=ann_id or ws.next_ann_id(),
        span=span,
        surface_text=doc.text_at(span),
        entity_type=entity_type,
        concept_id=concept_id,
        annotator=annotator if annotator is not None else ws.owner,
        updated_at=now_iso(),
    )
    if ann.ann_id in ws.annotations:
        raise ValidationError(f"annotation id {ann.ann_id} already exists")
    ws.annotations[ann.ann_id] = ann
    ws.refresh_counts()
    return ann


def update_annotation(
    ws: Workspace,
    doc: Document,
    schema: AnnotationSchema,
    ann_id: str,
    span: Span | None = None,
    entity_type: str | None = None,
    concept_id: str | None = ...,  # ellipsis sentinel: "leave unchanged"
    annotator: str | None = None,
) -> Annotation:
    if ann_id not in ws.annotations:
        raise NotFoundError(f"unknown annotation id {ann_id}")
    old = ws.annotations[ann_id]
    new_span = span if span is not None else old.span
    new_type = entity_type if entity_type is not None else old.entity_type
    new_concept = old.concept_id if concept_id is ... else concept_id
    violation = validate_span(doc, new_span)
    if violation:
        raise ValidationError(violation)
    if new_type not in schema.entity_type_names():
        raise ValidationError(f"unknown entity type '{new_type}'")
    _check_no_duplicate(ws, new_span, new_type, new_concept, ignore=ann_id)
    old.span = new_span
    old.surface_text = doc.text_at(new_span)
    old.entity_type = new_type
    old.concept_id = new_concept
    if annotator is not None:
        old.annotator = annotator
    old.updated_at = now_iso()
    ws.refresh_counts()
    return old


def delete_annotation(ws: Workspace, ann_id: str) -> list[str]:
    """Remove an annotation; cascade-delete every relation referencing it.
    Returns the ids of cascaded relations."""
    if ann_id not in ws.annotations:
        raise NotFoundError(f"unknown annotation id {ann_id}")
    del ws.annotations[ann_id]
    ws.cue_overlay.pop(ann_id, None)
    cascaded = [
        r.rel_id for r in ws.relations.values() if any(n.ann_id == ann_id for n in r.nodes)
    ]
    for rid in cascaded:
        del ws.relations[rid]
    ws.refresh_counts()
    return cascaded


def annotate_all_occurrences(
    ws: Workspace,
    doc: Document,
    schema: AnnotationSchema,
    surface: str,
    entity_type: str,
    concept_id: str | None = None,
    annotator: str | None = None,
) -> list[Annotation]:
    """Annotate every exact occurrence of ``surface`` in the document.

    Case-sensitive code-point match, overlapping occurrences included.
    Occurrences already carrying an identical (span, type, concept)
    annotation are skipped, which makes the operation idempotent.
    Occurrences whose span would cross a passage boundary cannot be
    annotated and are skipped as well.
    """
    if not surface:
        raise ValidationError("surface must be non-empty")
    if entity_type not in schema.entity_type_names():
        raise ValidationError(f"unknown entity type '{entity_type}'")
    existing = {a.strict_key() for a in ws.annotations.values()}
    created = []
    for start in find_occurrences(doc.text, surface):
        span = Span(start, len(surface))
        if validate_span(doc, span) is not None:
            continue
        if (start, len(surface), entity_type, concept_id) in existing:
            continue
        created.append(
            add_annotation(ws, doc, schema, span, entity_type, concept_id, annotator)
        )
    return created


def _validate_relation_nodes(
    ws: Workspace, schema: AnnotationSchema, relation_type: str, nodes: list[RelationNode]
) -> None:
    rtype = schema.relation_type(relation_type)
    if rtype is None:
        raise ValidationError(f"unknown relation type '{relation_type}'")
    n = len(nodes)
    if not 2 <= n <= 8:
        raise ValidationError(f"relation arity must be 2..8, got {n}")
    if not rtype.min_arity <= n <= rtype.max_arity:
        raise ValidationError(
            f"relation '{relation_type}' allows {rtype.min_arity}..{rtype.max_arity} nodes, got {n}"
        )
    for node in nodes:
        if node.ann_id not in ws.annotations:
            raise NotFoundError(f"relation node references unknown annotation {node.ann_id}")
    if rtype.node_types is not None:
        want = sorted(rtype.node_types)
        got = sorted(ws.annotations[n.ann_id].entity_type for n in nodes)
        if want != got:
            raise ValidationError(
                f"relation '{relation_type}' requires node types {want}, got {got}"
            )


def add_relation(
    ws: Workspace,
    schema: AnnotationSchema,
    relation_type: str,
    nodes: list[tuple[str, str]] | list[RelationNode],
    annotator: str | None = None,
    rel_id: str | None = None,
) -> Relation:
    node_objs = [n if isinstance(n, RelationNode) else RelationNode(*n) for n in nodes]
    _validate_relation_nodes(ws, schema, relation_type, node_objs)
    rel = Relation(
        rel_id=rel_id or ws.next_rel_id(),
        relation_type=relation_type,
        nodes=node_objs,
        annotator=annotator if annotator is not None else ws.owner,
        updated_at=now_iso(),
    )
    if rel.rel_id in ws.relations:
        raise ValidationError(f"relation id {rel.rel_id} already exists")
    ws.relations[rel.rel_id] = rel
    ws.refresh_counts()
    return rel


def update_relation(
    ws: Workspace,
    schema: AnnotationSchema,
    rel_id: str,
    relation_type: str | None = None,
    nodes: list[tuple[str, str]] | list[RelationNode] | None = None,
    annotator: str | None = None,
) -> Relation:
    if rel_id not in ws.relations:
        raise NotFoundError(f"unknown relation id {rel_id}")
    rel = ws.relations[rel_id]
    new_type = relation_type if relation_type is not None else rel.relation_type
    if nodes is not None:
        node_objs = [n if isinstance(n, RelationNode) else RelationNode(*n) for n in nodes]
    else:
        node_objs = rel.nodes
    _validate_relation_nodes(ws, schema, new_type, node_objs)
    rel.relation_type = new_type
    rel.nodes = node_objs
    if annotator is not None:
        rel.annotator = annotator
    rel.updated_at = now_iso()
    ws.refresh_counts()
    return rel


def delete_relation(ws: Workspace, rel_id: str) -> None:
    if rel_id not in ws.relations:
        raise NotFoundError(f"unknown relation id {rel_id}")
    del ws.relations[rel_id]
    ws.refresh_counts()


def set_document_status(
    ws: Workspace,
    schema: AnnotationSchema,
    triage: str | None = ...,
    done: bool | None = None,
) -> DocumentStatus:
    """Update triage label and/or done flag.  Triage labels come from the
    schema's closed vocabulary; pass None to clear the label."""
    if triage is not ...:
        if triage is not None and triage not in schema.triage_labels:
            raise ValidationError(
                f"unknown triage label '{triage}' (schema allows {schema.triage_labels})"
            )
        ws.status.triage_label = triage
    if done is not None:
        ws.status.done = bool(done)
    ws.status.last_update = now_iso()
    return ws.status
