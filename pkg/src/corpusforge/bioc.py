"""BioC XML import/export and plain-text import.

Supported subset of the public BioC DTD: collection / document / passage /
annotation / relation (no sentence elements).  All serialized offsets count
Unicode code points; the collection carries an ``offset-unit=codepoint``
infon recording that.  Concept identifiers map to the conventional
``identifier`` infon key; annotator attribution uses an ``annotator`` infon.

Parsing normalizes passage offsets to the contiguous concatenation model
used by the rest of the platform (annotation offsets are shifted along),
after checking every annotation's text against its located span in the
file's own coordinates.

Serialization is deterministic: passages ordered by offset, annotations by
(start, length, type, concept, id), relations by id, infons by key.  That
makes ``canonicalize`` (parse + serialize) idempotent and lets exports be
compared byte-for-byte.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime
from io import BytesIO

from ._util import now_iso, today_yyyymmdd
from .errors import ParseError, ValidationError
from .model import (
    Annotation,
    Document,
    Passage,
    Relation,
    RelationNode,
    Span,
    derive_figures,
    validate_span,
)

OFFSET_UNIT_INFON = "offset-unit"
OFFSET_UNIT_VALUE = "codepoint"

# Annotation/relation infon keys with dedicated model fields; everything
# else is preserved verbatim in the item's extra-infon map.
_ANN_KEYS = ("type", "identifier", "annotator", "updated_at")
_REL_KEYS = ("type", "annotator", "updated_at")


@dataclass
class BioCDocument:
    """A document plus its annotation payload (one flat set; exports merge
    per-workspace sets into this shape before serialization)."""

    document: Document
    annotations: list[Annotation] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)


@dataclass
class BioCCollection:
    source: str = "corpusforge"
    date: str = field(default_factory=today_yyyymmdd)
    key: str = "corpusforge.key"
    infons: dict[str, str] = field(default_factory=dict)
    documents: list[BioCDocument] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Parsing


def _infons_of(elem: ET.Element) -> dict[str, str]:
    out = {}
    for infon in elem.findall("infon"):
        key = infon.get("key")
        if key is None:
            raise ParseError("infon element without key attribute")
        out[key] = infon.text or ""
    return out


def _parse_annotation(elem: ET.Element, doc_id: str) -> Annotation:
    ann_id = elem.get("id")
    if not ann_id:
        raise ParseError(f"document {doc_id}: annotation without id attribute")
    infons = _infons_of(elem)
    locations = elem.findall("location")
    if len(locations) != 1:
        raise ParseError(
            f"document {doc_id}: annotation {ann_id} must carry exactly one location, "
            f"got {len(locations)}"
        )
    try:
        offset = int(locations[0].get("offset", ""))
        length = int(locations[0].get("length", ""))
    except ValueError:
        raise ParseError(f"document {doc_id}: annotation {ann_id} has non-integer location")
    if length < 1:
        raise ParseError(f"document {doc_id}: annotation {ann_id} has non-positive length")
    text_elem = elem.find("text")
    surface = text_elem.text or "" if text_elem is not None else ""
    extra = {k: v for k, v in infons.items() if k not in _ANN_KEYS}
    return Annotation(
        ann_id=ann_id,
        span=Span(offset, length),
        surface_text=surface,
        entity_type=infons.get("type", ""),
        concept_id=infons.get("identifier") or None,
        annotator=infons.get("annotator", ""),
        updated_at=infons.get("updated_at", ""),
        infons=extra,
    )


def _parse_relation(elem: ET.Element, doc_id: str) -> Relation:
    rel_id = elem.get("id")
    if not rel_id:
        raise ParseError(f"document {doc_id}: relation without id attribute")
    infons = _infons_of(elem)
    nodes = []
    for node in elem.findall("node"):
        refid = node.get("refid")
        if not refid:
            raise ParseError(f"document {doc_id}: relation {rel_id} node without refid")
        nodes.append(RelationNode(refid, node.get("role", "")))
    extra = {k: v for k, v in infons.items() if k not in _REL_KEYS}
    return Relation(
        rel_id=rel_id,
        relation_type=infons.get("type", ""),
        nodes=nodes,
        annotator=infons.get("annotator", ""),
        updated_at=infons.get("updated_at", ""),
        infons=extra,
    )


def parse_bioc(data: bytes) -> BioCCollection:
    """Parse BioC XML bytes into a collection.

    Annotation locations are checked against the passage text in the file's
    own coordinates; a mismatch is a ParseError naming document and offset.
    Passage offsets are then rebased to the contiguous model (annotations
    shifted along), so documents coming out of here always satisfy the
    model invariants.
    """
    try:
        root = ET.parse(BytesIO(data)).getroot()
    except ET.ParseError as e:
        raise ParseError(f"malformed XML: {e}") from e
    if root.tag != "collection":
        raise ParseError(f"expected <collection> root, got <{root.tag}>")

    infons = _infons_of(root)
    # Serialization detail, re-added on every export; keep round-trips exact.
    infons.pop(OFFSET_UNIT_INFON, None)
    coll = BioCCollection(
        source=root.findtext("source", ""),
        date=root.findtext("date", ""),
        key=root.findtext("key", ""),
        infons=infons,
    )
    coll.documents = [_parse_document(doc_elem) for doc_elem in root.findall("document")]
    return coll


def _parse_document(doc_elem: ET.Element) -> BioCDocument:
    doc_id = doc_elem.findtext("id")
    if not doc_id:
        raise ParseError("document without <id>")
    metadata = _infons_of(doc_elem)

    passages: list[Passage] = []
    annotations: list[Annotation] = []
    relations: list[Relation] = []
    for p_elem in doc_elem.findall("passage"):
        offset_text = p_elem.findtext("offset")
        if offset_text is None:
            raise ParseError(f"document {doc_id}: passage without <offset>")
        try:
            offset = int(offset_text)
        except ValueError:
            raise ParseError(f"document {doc_id}: non-integer passage offset {offset_text!r}")
        passages.append(Passage(offset, p_elem.findtext("text") or "", _infons_of(p_elem)))
        for a_elem in p_elem.findall("annotation"):
            annotations.append(_parse_annotation(a_elem, doc_id))
        for r_elem in p_elem.findall("relation"):
            relations.append(_parse_relation(r_elem, doc_id))
    for a_elem in doc_elem.findall("annotation"):
        annotations.append(_parse_annotation(a_elem, doc_id))
    for r_elem in doc_elem.findall("relation"):
        relations.append(_parse_relation(r_elem, doc_id))

    passages.sort(key=lambda p: p.offset)
    for prev, cur in zip(passages, passages[1:]):
        if cur.offset < prev.end:
            raise ParseError(
                f"document {doc_id}: passage at offset {cur.offset} overlaps "
                f"the previous passage ending at {prev.end}"
            )

    # Surface check in file coordinates, then rebase to the contiguous model.
    for ann in annotations:
        holder = None
        for p in passages:
            if p.offset <= ann.span.start and ann.span.end <= p.end:
                holder = p
                break
        if holder is None:
            raise ParseError(
                f"document {doc_id}: annotation {ann.ann_id} at offset {ann.span.start} "
                f"lies in no single passage"
            )
        located = holder.text[ann.span.start - holder.offset : ann.span.end - holder.offset]
        if located != ann.surface_text:
            raise ParseError(
                f"document {doc_id}: annotation {ann.ann_id} text {ann.surface_text!r} "
                f"does not match located span {located!r} at offset {ann.span.start}"
            )

    shift: dict[int, int] = {}
    cursor = 0
    for p in passages:
        shift[p.offset] = cursor - p.offset
        cursor += len(p.text)
    for ann in annotations:
        for p in passages:
            if p.offset <= ann.span.start and ann.span.end <= p.offset + len(p.text):
                ann.span = Span(ann.span.start + shift[p.offset], ann.span.length)
                break
    for p in passages:
        p.offset += shift[p.offset]

    known = {a.ann_id for a in annotations}
    for rel in relations:
        for node in rel.nodes:
            if node.ann_id not in known:
                raise ParseError(
                    f"document {doc_id}: relation {rel.rel_id} references "
                    f"unknown annotation {node.ann_id}"
                )

    # Annotation sets are unordered; normalize to canonical order so that
    # parse output is independent of file ordering.
    annotations.sort(
        key=lambda a: (a.span.start, a.span.length, a.entity_type, a.concept_id or "", a.ann_id)
    )
    relations.sort(key=lambda r: r.rel_id)

    document = Document(doc_id=doc_id, metadata=metadata, passages=passages)
    document.figures = derive_figures(passages)
    document.validate()
    return BioCDocument(document, annotations, relations)


# ---------------------------------------------------------------------------
# Serialization


def _append_infons(parent: ET.Element, infons: dict[str, str]) -> None:
    for key in sorted(infons):
        e = ET.SubElement(parent, "infon", key=key)
        e.text = infons[key]


def _validate_for_export(coll: BioCCollection) -> None:
    if not coll.documents:
        raise ValidationError("refusing to serialize an empty collection")
    if not re.fullmatch(r"\d{8}", coll.date or ""):
        raise ValidationError(f"collection date {coll.date!r} is not YYYYMMDD")
    try:
        datetime.strptime(coll.date, "%Y%m%d")
    except ValueError:
        raise ValidationError(f"collection date {coll.date!r} is not a calendar date")
    seen_ids = set()
    for bdoc in coll.documents:
        doc = bdoc.document
        doc.validate()
        if doc.doc_id in seen_ids:
            raise ValidationError(f"duplicate document id {doc.doc_id} in collection")
        seen_ids.add(doc.doc_id)
        ann_ids = set()
        for ann in bdoc.annotations:
            violation = validate_span(doc, ann.span)
            if violation:
                raise ValidationError(f"document {doc.doc_id}, annotation {ann.ann_id}: {violation}")
            if doc.text_at(ann.span) != ann.surface_text:
                raise ValidationError(
                    f"document {doc.doc_id}, annotation {ann.ann_id}: cached text "
                    f"{ann.surface_text!r} does not match document text at span"
                )
            if ann.ann_id in ann_ids:
                raise ValidationError(f"document {doc.doc_id}: duplicate annotation id {ann.ann_id}")
            ann_ids.add(ann.ann_id)
        for rel in bdoc.relations:
            if not 2 <= len(rel.nodes) <= 8:
                raise ValidationError(
                    f"document {doc.doc_id}, relation {rel.rel_id}: arity "
                    f"{len(rel.nodes)} outside 2..8"
                )
            for node in rel.nodes:
                if node.ann_id not in ann_ids:
                    raise ValidationError(
                        f"document {doc.doc_id}, relation {rel.rel_id}: dangling "
                        f"node reference {node.ann_id}"
                    )


def serialize_bioc(coll: BioCCollection) -> bytes:
    """Serialize a collection to deterministic BioC XML bytes."""
    _validate_for_export(coll)

    root = ET.Element("collection")
    ET.SubElement(root, "source").text = coll.source
    ET.SubElement(root, "date").text = coll.date
    ET.SubElement(root, "key").text = coll.key
    infons = dict(coll.infons)
    infons[OFFSET_UNIT_INFON] = OFFSET_UNIT_VALUE
    _append_infons(root, infons)

    for bdoc in coll.documents:
        doc = bdoc.document
        d_elem = ET.SubElement(root, "document")
        ET.SubElement(d_elem, "id").text = doc.doc_id
        _append_infons(d_elem, doc.metadata)

        anns_by_passage: dict[int, list[Annotation]] = {}
        for ann in bdoc.annotations:
            anns_by_passage.setdefault(doc.passage_index_at(ann.span.start), []).append(ann)

        for idx, passage in enumerate(sorted(doc.passages, key=lambda p: p.offset)):
            p_elem = ET.SubElement(d_elem, "passage")
            _append_infons(p_elem, passage.infons)
            ET.SubElement(p_elem, "offset").text = str(passage.offset)
            ET.SubElement(p_elem, "text").text = passage.text
            for ann in sorted(
                anns_by_passage.get(idx, []),
                key=lambda a: (a.span.start, a.span.length, a.entity_type,
                               a.concept_id or "", a.ann_id),
            ):
                a_elem = ET.SubElement(p_elem, "annotation", id=ann.ann_id)
                a_infons = {"type": ann.entity_type}
                if ann.concept_id:
                    a_infons["identifier"] = ann.concept_id
                if ann.annotator:
                    a_infons["annotator"] = ann.annotator
                if ann.updated_at:
                    a_infons["updated_at"] = ann.updated_at
                a_infons.update(ann.infons)
                _append_infons(a_elem, a_infons)
                ET.SubElement(
                    a_elem, "location",
                    offset=str(ann.span.start), length=str(ann.span.length),
                )
                ET.SubElement(a_elem, "text").text = ann.surface_text

        for rel in sorted(bdoc.relations, key=lambda r: r.rel_id):
            r_elem = ET.SubElement(d_elem, "relation", id=rel.rel_id)
            r_infons = {"type": rel.relation_type}
            if rel.annotator:
                r_infons["annotator"] = rel.annotator
            if rel.updated_at:
                r_infons["updated_at"] = rel.updated_at
            r_infons.update(rel.infons)
            _append_infons(r_elem, r_infons)
            for node in rel.nodes:
                ET.SubElement(r_elem, "node", refid=node.ann_id, role=node.role)

    ET.indent(root, space="  ")
    body = ET.tostring(root, encoding="unicode")
    header = '<?xml version="1.0" encoding="UTF-8"?>\n<!DOCTYPE collection SYSTEM "BioC.dtd">\n'
    return (header + body + "\n").encode("utf-8")


def canonicalize(data: bytes) -> bytes:
    """Parse-then-serialize normalization; idempotent by construction."""
    return serialize_bioc(parse_bioc(data))


# ---------------------------------------------------------------------------
# Plain text import


def import_plain_text(text: str, doc_id: str) -> Document:
    """Build a document from plain text: paragraphs split on blank lines
    become contiguous passages; the first of several paragraphs is tagged
    as the title."""
    if not doc_id:
        raise ValidationError("doc_id must be non-empty")
    paragraphs = [p.strip() for p in re.split(r"\n\s*\n", text)]
    paragraphs = [p for p in paragraphs if p]
    if not paragraphs:
        raise ValidationError("plain-text import requires non-empty text")
    passages = []
    offset = 0
    for i, para in enumerate(paragraphs):
        section = "title" if i == 0 and len(paragraphs) >= 2 else "paragraph"
        passages.append(Passage(offset, para, {"section": section}))
        offset += len(para)
    metadata = {"source": "plain-text"}
    if len(paragraphs) >= 2:
        metadata["title"] = paragraphs[0]
    doc = Document(doc_id=doc_id, metadata=metadata, passages=passages)
    doc.validate()
    return doc


def collection_for_export(
    documents: list[BioCDocument],
    source: str = "corpusforge",
    key: str = "corpusforge.key",
    infons: dict[str, str] | None = None,
) -> BioCCollection:
    return BioCCollection(
        source=source,
        date=today_yyyymmdd(),
        key=key,
        infons=dict(infons or {}),
        documents=documents,
    )
