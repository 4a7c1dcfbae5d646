"""Agreement scores: symmetric F1-style ratios for entities and relations.

score = 2 * |matched pairs| / (|A| + |B|), and 1.0 when both sides are
empty (vacuous agreement).  Multi-document scores sum numerators and
denominators across documents before dividing.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..model import Annotation, Relation
from .kernels import NO_EDGE, min_cost_max_match
from .levels import MatchLevel
from .matching import Matching, match_sets


def score_from_counts(matched: int, size_a: int, size_b: int) -> float:
    if size_a + size_b == 0:
        return 1.0
    return 2.0 * matched / (size_a + size_b)


def pair_agreement_score(
    a: list[Annotation],
    b: list[Annotation],
    level: MatchLevel,
    doc_a: str | None = None,
    doc_b: str | None = None,
) -> float:
    m = match_sets(a, b, level, doc_a, doc_b)
    return score_from_counts(len(m.pairs), len(a), len(b))


def multi_document_score(
    per_doc_sets: list[tuple[list[Annotation], list[Annotation]]], level: MatchLevel
) -> float:
    matched = 0
    total = 0
    for a, b in per_doc_sets:
        matched += len(match_sets(a, b, level).pairs)
        total += len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * matched / total


# ---------------------------------------------------------------------------
# Relation agreement


def _roles_bijection_exists(
    ra: Relation, rb: Relation, matched_pairs: set[tuple[str, str]]
) -> bool:
    """Role-preserving bijection between node lists where every node maps
    to its matched counterpart in the underlying entity matching."""
    roles_a: dict[str, list[str]] = {}
    roles_b: dict[str, list[str]] = {}
    for n in ra.nodes:
        roles_a.setdefault(n.role, []).append(n.ann_id)
    for n in rb.nodes:
        roles_b.setdefault(n.role, []).append(n.ann_id)
    if set(roles_a) != set(roles_b):
        return False
    for role, ids_a in roles_a.items():
        ids_b = roles_b[role]
        if len(ids_a) != len(ids_b):
            return False
        cost = np.full((len(ids_a), len(ids_b)), NO_EDGE, np.int64)
        for i, xa in enumerate(ids_a):
            for j, xb in enumerate(ids_b):
                if (xa, xb) in matched_pairs:
                    cost[i, j] = 0
        assign = min_cost_max_match(cost)
        if int((assign >= 0).sum()) != len(ids_a):
            return False
    return True


def relations_compatible(
    ra: Relation, rb: Relation, matched_pairs: set[tuple[str, str]]
) -> bool:
    return (
        ra.relation_type == rb.relation_type
        and len(ra.nodes) == len(rb.nodes)
        and _roles_bijection_exists(ra, rb, matched_pairs)
    )


def relation_match_count(
    rel_a: list[Relation],
    rel_b: list[Relation],
    underlying: Matching,
    doc_id: str | None = None,
) -> int:
    """Size of the maximum one-to-one matching over the compatibility graph."""
    if doc_id is not None and underlying.doc_id is not None and underlying.doc_id != doc_id:
        raise ValidationError(
            f"underlying matching is for document {underlying.doc_id}, not {doc_id}"
        )
    if not rel_a or not rel_b:
        return 0
    matched_pairs = underlying.matched_id_pairs()
    cost = np.full((len(rel_a), len(rel_b)), NO_EDGE, np.int64)
    for i, ra in enumerate(rel_a):
        for j, rb in enumerate(rel_b):
            if relations_compatible(ra, rb, matched_pairs):
                cost[i, j] = 0
    assign = min_cost_max_match(cost)
    return int((assign >= 0).sum())


def relation_agreement(
    rel_a: list[Relation],
    rel_b: list[Relation],
    underlying: Matching,
    doc_id: str | None = None,
) -> float:
    """Score relation sets given an entity matching between the two
    annotators."""
    matched = relation_match_count(rel_a, rel_b, underlying, doc_id)
    return score_from_counts(matched, len(rel_a), len(rel_b))
