"""Match levels, cue vocabulary, and the vectorized pair-predicate table.

Levels are totally ordered by strictness:

    STRICT > SPAN_TYPE > OVERLAP_TYPE > OVERLAP

STRICT requires identical span, equal entity type and equal concept id
(two absent concept ids count as equal).  SPAN_TYPE drops the concept
requirement, OVERLAP_TYPE relaxes identical spans to >=1 shared code
point, OVERLAP additionally ignores the entity type.
"""

from __future__ import annotations

import enum

import numpy as np

from ..model import Annotation


class MatchLevel(enum.Enum):
    STRICT = 3
    SPAN_TYPE = 2
    OVERLAP_TYPE = 1
    OVERLAP = 0

    @property
    def rank(self) -> int:
        """Strictness rank; higher is stricter."""
        return self.value

    @classmethod
    def from_rank(cls, rank: int) -> "MatchLevel":
        return _BY_RANK[rank]

    @classmethod
    def parse(cls, name: str) -> "MatchLevel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(
                f"unknown match level {name!r} (expected one of "
                f"{', '.join(l.name.lower() for l in cls)})"
            )


_BY_RANK = {level.value: level for level in MatchLevel}

LEVELS_STRICTEST_FIRST = sorted(MatchLevel, key=lambda l: -l.rank)


class Cue(enum.Enum):
    """Per-annotation agreement status rendered as an underline style."""

    FULL_AGREEMENT = "full_agreement"      # grey underline
    CONCEPT_MISMATCH = "concept_mismatch"  # black underline
    SPAN_PARTIAL = "span_partial"          # dashed underline
    SINGLETON = "singleton"                # no underline


NO_MATCH = -1  # sentinel rank in achieved-level matrices


def encode_sets(
    a: list[Annotation], b: list[Annotation]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Integer-encode two annotation sets over a shared vocabulary:
    (starts_a, lengths_a, type/concept codes...) as int64 arrays."""
    types: dict[str, int] = {}
    concepts: dict[str | None, int] = {}

    def tcode(t: str) -> int:
        return types.setdefault(t, len(types))

    def ccode(c: str | None) -> int:
        return concepts.setdefault(c, len(concepts))

    def encode(anns: list[Annotation]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        starts = np.fromiter((x.span.start for x in anns), np.int64, len(anns))
        lengths = np.fromiter((x.span.length for x in anns), np.int64, len(anns))
        codes = np.fromiter(
            ((tcode(x.entity_type) << 32) | ccode(x.concept_id) for x in anns),
            np.int64,
            len(anns),
        )
        return starts, lengths, codes

    sa, la, ca = encode(a)
    sb, lb, cb = encode(b)
    return sa, la, ca, sb, lb, cb


def achieved_level_matrix(a: list[Annotation], b: list[Annotation]) -> np.ndarray:
    """(len(a), len(b)) int8 matrix of the strictest level each pair
    satisfies, or NO_MATCH when the spans do not even overlap."""
    if not a or not b:
        return np.full((len(a), len(b)), NO_MATCH, np.int8)
    sa, la, ca, sb, lb, cb = encode_sets(a, b)
    ea = sa + la
    eb = sb + lb
    overlap = (sa[:, None] < eb[None, :]) & (sb[None, :] < ea[:, None])
    same_type = (ca[:, None] >> 32) == (cb[None, :] >> 32)
    same_span = (sa[:, None] == sb[None, :]) & (la[:, None] == lb[None, :])
    same_concept = (ca[:, None] & 0xFFFFFFFF) == (cb[None, :] & 0xFFFFFFFF)

    achieved = np.full((len(a), len(b)), NO_MATCH, np.int8)
    achieved[overlap] = MatchLevel.OVERLAP.rank
    achieved[overlap & same_type] = MatchLevel.OVERLAP_TYPE.rank
    achieved[same_span & same_type] = MatchLevel.SPAN_TYPE.rank
    achieved[same_span & same_type & same_concept] = MatchLevel.STRICT.rank
    return achieved


def pair_satisfies(a: Annotation, b: Annotation, level: MatchLevel) -> bool:
    """Scalar form of the level predicate (used by oracles and checks)."""
    overlap = a.span.overlaps(b.span)
    same_span = a.span == b.span
    same_type = a.entity_type == b.entity_type
    same_concept = a.concept_id == b.concept_id
    if level is MatchLevel.STRICT:
        return same_span and same_type and same_concept
    if level is MatchLevel.SPAN_TYPE:
        return same_span and same_type
    if level is MatchLevel.OVERLAP_TYPE:
        return overlap and same_type
    return overlap
