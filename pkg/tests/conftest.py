"""Shared fixtures and independent oracles used across the suite."""

from __future__ import annotations

import itertools
import random

import pytest

from corpusforge.model import (
    Annotation,
    AnnotationSchema,
    Document,
    EntityType,
    Passage,
    RelationType,
    Span,
    Workspace,
)


@pytest.fixture
def schema() -> AnnotationSchema:
    return AnnotationSchema(
        entity_types=[
            EntityType("GENE", "#ffd43b"),
            EntityType("Disease", "#ff8787"),
            EntityType("Mutation", "#74c0fc"),
        ],
        relation_types=[
            RelationType("gene-disease", ("GENE", "Disease")),
            RelationType("association", None, 2, 8),
        ],
        triage_labels=["relevant", "irrelevant"],
    )


def make_doc(doc_id: str, *texts: str, infons: list[dict] | None = None) -> Document:
    passages = []
    offset = 0
    for i, text in enumerate(texts):
        inf = infons[i] if infons else {"section": "paragraph" if i else "title"}
        passages.append(Passage(offset, text, dict(inf)))
        offset += len(text)
    doc = Document(doc_id=doc_id, passages=passages)
    doc.validate()
    return doc


@pytest.fixture
def doc() -> Document:
    return make_doc(
        "d1",
        "p53 and DACH1 in breast cancer. ",
        "The p53 protein binds DNA. p53 mutations such as R248Q occur in cancer. ",
        "Figure 1 shows p53 levels.",
    )


def make_workspace(doc: Document, owner: str = "alice", number: int = 1) -> Workspace:
    return Workspace(
        workspace_id=f"ws-{owner}-{doc.doc_id}",
        round_number=number,
        doc_id=doc.doc_id,
        owner=owner,
    )


# ---------------------------------------------------------------------------
# Independent oracles


def naive_occurrences(text: str, surface: str) -> list[int]:
    """Character-by-character scan, independent of str.find."""
    out = []
    n, m = len(text), len(surface)
    for i in range(n - m + 1):
        if all(text[i + k] == surface[k] for k in range(m)):
            out.append(i)
    return out


def oracle_pair_ok(a: Annotation, b: Annotation, level_name: str) -> bool:
    same_span = (a.span.start, a.span.length) == (b.span.start, b.span.length)
    same_type = a.entity_type == b.entity_type
    same_concept = a.concept_id == b.concept_id
    overlap = a.span.start < b.span.end and b.span.start < a.span.end
    if level_name == "STRICT":
        return same_span and same_type and same_concept
    if level_name == "SPAN_TYPE":
        return same_span and same_type
    if level_name == "OVERLAP_TYPE":
        return overlap and same_type
    return overlap


def brute_force_max_matching(a: list[Annotation], b: list[Annotation], level_name: str) -> int:
    """Exhaustive maximum one-to-one matching cardinality: try every
    injective assignment of A indices to compatible B indices."""
    compat = [
        [j for j, bb in enumerate(b) if oracle_pair_ok(aa, bb, level_name)] for aa in a
    ]

    best = 0

    def go(i: int, used: set, size: int) -> None:
        nonlocal best
        if size + (len(a) - i) <= best:
            return
        if i == len(a):
            best = max(best, size)
            return
        go(i + 1, used, size)
        for j in compat[i]:
            if j not in used:
                used.add(j)
                go(i + 1, used, size + 1)
                used.remove(j)

    go(0, set(), 0)
    return best


def random_annotation_set(rng: random.Random, doc_len: int, max_n: int = 6,
                          prefix: str = "A") -> list[Annotation]:
    """Random spans with clustered starts so overlaps/identical spans occur."""
    n = rng.randint(0, max_n)
    types = ["GENE", "Disease", "Mutation"]
    concepts = [None, "C:1", "C:2"]
    out = []
    seen = set()
    for i in range(n):
        start = rng.choice([0, 1, 2, 5, 8, 13, 21]) % max(1, doc_len - 4)
        length = rng.randint(1, 4)
        etype = rng.choice(types)
        concept = rng.choice(concepts)
        key = (start, length, etype, concept)
        if key in seen:
            continue
        seen.add(key)
        out.append(
            Annotation(f"{prefix}{i + 1}", Span(start, length), "x" * length, etype, concept)
        )
    return out
