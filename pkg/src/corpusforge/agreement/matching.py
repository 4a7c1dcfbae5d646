"""One-to-one matching between two annotators' annotation sets.

``match_sets`` produces a maximum-cardinality matching under the level
predicate.  Ties between maximum matchings are broken by preferring pairs
that also satisfy stricter levels, then pairs with closer start offsets;
both preferences are folded into one lexicographic cost and resolved
exactly by the min-cost kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..model import Annotation
from .kernels import NO_EDGE, min_cost_max_match
from .levels import NO_MATCH, MatchLevel, achieved_level_matrix


@dataclass(frozen=True)
class MatchedPair:
    a_id: str
    b_id: str
    achieved: MatchLevel


@dataclass
class Matching:
    level: MatchLevel
    pairs: list[MatchedPair] = field(default_factory=list)
    unmatched_a: list[str] = field(default_factory=list)
    unmatched_b: list[str] = field(default_factory=list)
    doc_id: str | None = None

    @property
    def pair_map(self) -> dict[str, str]:
        return {p.a_id: p.b_id for p in self.pairs}

    def matched_id_pairs(self) -> set[tuple[str, str]]:
        return {(p.a_id, p.b_id) for p in self.pairs}


def _cost_matrix(achieved: np.ndarray, starts_a: np.ndarray, starts_b: np.ndarray,
                 min_rank: int) -> np.ndarray:
    """Lexicographic cost: first prefer stricter achieved levels, then
    smaller |startA - startB|.  NO_EDGE marks pairs below min_rank."""
    n_a, n_b = achieved.shape
    dist = np.abs(starts_a[:, None] - starts_b[None, :]).astype(np.int64)
    # One unit of strictness must outweigh any achievable distance total.
    big = (min(n_a, n_b) + 1) * (int(dist.max(initial=0)) + 1)
    cost = (3 - achieved.astype(np.int64)) * big + dist
    cost[achieved < min_rank] = NO_EDGE
    return cost


def match_indices(a: list[Annotation], b: list[Annotation], level: MatchLevel) -> np.ndarray:
    """Index-level matching: array of length len(a) with the matched index
    in ``b`` or -1."""
    achieved = achieved_level_matrix(a, b)
    if achieved.size == 0 or not (achieved >= level.rank).any():
        return np.full(len(a), -1, np.int64)
    starts_a = np.fromiter((x.span.start for x in a), np.int64, len(a))
    starts_b = np.fromiter((x.span.start for x in b), np.int64, len(b))
    cost = _cost_matrix(achieved, starts_a, starts_b, level.rank)
    return min_cost_max_match(cost)


def match_sets(
    a: list[Annotation],
    b: list[Annotation],
    level: MatchLevel,
    doc_a: str | None = None,
    doc_b: str | None = None,
) -> Matching:
    """Maximum one-to-one matching between two annotation sets of the same
    document at the given level."""
    if doc_a is not None and doc_b is not None and doc_a != doc_b:
        raise ValidationError(
            f"cannot match annotation sets from different documents ({doc_a} vs {doc_b})"
        )
    achieved = achieved_level_matrix(a, b)
    assign = match_indices(a, b, level)
    matching = Matching(level=level, doc_id=doc_a if doc_a is not None else doc_b)
    matched_b = set()
    for i, ann in enumerate(a):
        j = int(assign[i]) if i < len(assign) else -1
        if j >= 0:
            matching.pairs.append(
                MatchedPair(ann.ann_id, b[j].ann_id, MatchLevel.from_rank(int(achieved[i, j])))
            )
            matched_b.add(j)
        else:
            matching.unmatched_a.append(ann.ann_id)
    matching.unmatched_b = [x.ann_id for j, x in enumerate(b) if j not in matched_b]
    return matching


def hierarchical_match_ranks(
    a: list[Annotation], b: list[Annotation]
) -> tuple[dict[int, tuple[int, int]], dict[int, int]]:
    """Strictest-first matching used for cue classification.

    STRICT pairs are fixed first and removed, then SPAN_TYPE, then
    OVERLAP_TYPE, then OVERLAP.  Returns ({a_idx: (b_idx, rank)},
    {b_idx: rank}) for the matched vertices.
    """
    result_a: dict[int, tuple[int, int]] = {}
    result_b: dict[int, int] = {}
    remaining_a = list(range(len(a)))
    remaining_b = list(range(len(b)))
    achieved_full = achieved_level_matrix(a, b)
    for level in sorted(MatchLevel, key=lambda l: -l.rank):
        if not remaining_a or not remaining_b:
            break
        sub_a = [a[i] for i in remaining_a]
        sub_b = [b[j] for j in remaining_b]
        assign = match_indices(sub_a, sub_b, level)
        taken_a = []
        taken_b = []
        for si, sj in enumerate(assign):
            if sj < 0:
                continue
            i = remaining_a[si]
            j = remaining_b[int(sj)]
            rank = int(achieved_full[i, j])
            if rank != level.rank:
                # Stricter pairs were consumed in an earlier stage; a pair
                # surviving to this stage at a stricter rank is still fixed
                # here with its true achieved rank.
                rank = max(rank, level.rank)
            result_a[i] = (j, rank)
            result_b[j] = rank
            taken_a.append(i)
            taken_b.append(j)
        remaining_a = [i for i in remaining_a if i not in set(taken_a)]
        remaining_b = [j for j in remaining_b if j not in set(taken_b)]
    return result_a, result_b


def agreement_monotone(levels_to_counts: dict[MatchLevel, int]) -> bool:
    """True when relaxing the level never decreases matching cardinality."""
    ordered = sorted(levels_to_counts, key=lambda l: -l.rank)
    counts = [levels_to_counts[l] for l in ordered]
    return all(x <= y for x, y in zip(counts, counts[1:]))
