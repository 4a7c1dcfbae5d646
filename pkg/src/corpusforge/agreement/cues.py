"""Cue classification and the collaborative-round merge.

Cues are computed per annotation against every partner using hierarchical
(strictest-first) matching, so each annotation's cue is stable regardless
of how an order-free maximum matching would have broken ties.

With more than one partner the classification generalizes Figure-4-style
two-annotator cues as follows (worst disagreement wins):

* STRICT with every partner           -> FULL_AGREEMENT
* same span+type, concept differs,
  with some partner                   -> CONCEPT_MISMATCH
* matched by nobody                   -> SINGLETON
* anything else (partial overlap, or
  missed entirely by some partner)    -> SPAN_PARTIAL
"""

from __future__ import annotations

from collections import Counter

from .._util import now_iso
from ..errors import ValidationError
from ..model import (
    SHARED_OWNER,
    Annotation,
    CueFlag,
    Relation,
    RelationNode,
    VariantInfo,
    Workspace,
)
from .levels import Cue, MatchLevel
from .matching import hierarchical_match_ranks


def _cue_from_outcomes(ranks: list[int | None]) -> Cue:
    """ranks holds, per partner, the achieved hierarchical-match rank of
    one annotation (None = unmatched by that partner)."""
    if ranks and all(r == MatchLevel.STRICT.rank for r in ranks):
        return Cue.FULL_AGREEMENT
    if any(r == MatchLevel.SPAN_TYPE.rank for r in ranks):
        return Cue.CONCEPT_MISMATCH
    if all(r is None for r in ranks):
        return Cue.SINGLETON
    return Cue.SPAN_PARTIAL


def cue_flags(
    mine: list[Annotation],
    partner_sets: list[tuple[str, list[Annotation]]],
    doc_id: str | None = None,
) -> dict[str, CueFlag]:
    """Full cue computation: cue per annotation plus per-partner achieved
    levels and the partners' conflicting variants, attributed by the
    (pseudonymous) labels given in ``partner_sets``."""
    per_ann_ranks: dict[int, list[int | None]] = {i: [] for i in range(len(mine))}
    per_ann_partners: dict[int, dict[str, str]] = {i: {} for i in range(len(mine))}
    per_ann_variants: dict[int, list[VariantInfo]] = {i: [] for i in range(len(mine))}

    for label, partner in partner_sets:
        matched_a, _ = hierarchical_match_ranks(mine, partner)
        for i in range(len(mine)):
            if i in matched_a:
                j, rank = matched_a[i]
                per_ann_ranks[i].append(rank)
                per_ann_partners[i][label] = MatchLevel.from_rank(rank).name
                if rank < MatchLevel.STRICT.rank:
                    other = partner[j]
                    per_ann_variants[i].append(
                        VariantInfo(
                            partner=label,
                            start=other.span.start,
                            length=other.span.length,
                            entity_type=other.entity_type,
                            concept_id=other.concept_id,
                            level=MatchLevel.from_rank(rank).name,
                        )
                    )
            else:
                per_ann_ranks[i].append(None)
                per_ann_partners[i][label] = "none"

    out = {}
    for i, ann in enumerate(mine):
        cue = _cue_from_outcomes(per_ann_ranks[i])
        out[ann.ann_id] = CueFlag(
            cue=cue.value,
            partners=per_ann_partners[i],
            variants=per_ann_variants[i],
        )
    return out


def classify_cues(
    mine: list[Annotation],
    partners: list[list[Annotation]],
    doc_id: str | None = None,
) -> dict[str, Cue]:
    """Cue per annotation in ``mine`` against all partner sets."""
    labeled = [(f"partner {k + 1}", p) for k, p in enumerate(partners)]
    flags = cue_flags(mine, labeled, doc_id)
    return {ann_id: Cue(flag.cue) for ann_id, flag in flags.items()}


# ---------------------------------------------------------------------------
# Collaborative-round seeding


def _ann_key(a: Annotation) -> tuple:
    return a.strict_key()


def _rel_key(r: Relation, anns: dict[str, Annotation]) -> tuple:
    nodes = tuple(sorted((n.role,) + anns[n.ann_id].strict_key() for n in r.nodes))
    return (r.relation_type, nodes)


def merge_collaborative_seed(
    versions: list[Workspace],
    labels: list[str] | None = None,
    workspace_id: str = "merged",
    round_number: int = 1,
) -> Workspace:
    """Merge >=2 annotated copies of one document into the shared seed of a
    collaborative round.

    Annotations agreeing STRICTly across every version collapse to one
    auto-resolved copy.  Every other annotation appears once per distinct
    (span, type, concept) variant, flagged with its cue and attributed to
    the contributing annotators' labels.  Relations merge analogously: a
    relation is auto-resolved when all versions contain a relation of the
    same type whose role-tagged nodes agree STRICTly.
    """
    if len(versions) < 2:
        raise ValidationError("collaborative merge needs at least two versions")
    doc_ids = {ws.doc_id for ws in versions}
    if len(doc_ids) != 1:
        raise ValidationError(f"cannot merge workspaces of different documents: {sorted(doc_ids)}")
    if labels is None:
        labels = [f"Annotator {chr(ord('A') + i)}" for i in range(len(versions))]
    if len(labels) != len(versions):
        raise ValidationError("labels must parallel versions")

    merged = Workspace(
        workspace_id=workspace_id,
        round_number=round_number,
        doc_id=versions[0].doc_id,
        owner=SHARED_OWNER,
    )

    # Annotations, grouped by strict identity across versions.
    carriers: dict[tuple, list[int]] = {}
    sample: dict[tuple, Annotation] = {}
    for vi, ws in enumerate(versions):
        for ann in ws.annotation_list():
            key = _ann_key(ann)
            carriers.setdefault(key, []).append(vi)
            sample.setdefault(key, ann)

    ann_id_by_key: dict[tuple, str] = {}
    flags_by_version = [
        cue_flags(
            ws.annotation_list(),
            [(labels[vj], other.annotation_list())
             for vj, other in enumerate(versions) if vj != vi],
        )
        for vi, ws in enumerate(versions)
    ]

    seq = 0
    for key in sorted(carriers, key=lambda k: (k[0], k[1], k[2], k[3] or "")):
        vis = sorted(set(carriers[key]))
        src = sample[key]
        seq += 1
        ann_id = f"A{seq}"
        ann_id_by_key[key] = ann_id
        resolved = len(vis) == len(versions)
        annotator = "consensus" if resolved else "+".join(labels[v] for v in vis)
        merged.annotations[ann_id] = Annotation(
            ann_id=ann_id,
            span=src.span,
            surface_text=src.surface_text,
            entity_type=src.entity_type,
            concept_id=src.concept_id,
            annotator=annotator,
            updated_at=now_iso(),
        )
        if not resolved:
            # Cue computed from the first carrier's perspective.
            first = vis[0]
            for ann in versions[first].annotation_list():
                if _ann_key(ann) == key:
                    merged.cue_overlay[ann_id] = flags_by_version[first][ann.ann_id]
                    break

    # Relations, grouped by (type, role-tagged strict node identities).
    rel_carriers: dict[tuple, list[int]] = {}
    rel_sample: dict[tuple, tuple[int, Relation]] = {}
    for vi, ws in enumerate(versions):
        for rel in ws.relation_list():
            key = _rel_key(rel, ws.annotations)
            rel_carriers.setdefault(key, []).append(vi)
            rel_sample.setdefault(key, (vi, rel))

    seq = 0
    for key in sorted(rel_carriers):
        vis = sorted(set(rel_carriers[key]))
        src_vi, src = rel_sample[key]
        src_ws = versions[src_vi]
        seq += 1
        rel_id = f"R{seq}"
        resolved = len(vis) == len(versions)
        annotator = "consensus" if resolved else "+".join(labels[v] for v in vis)
        nodes = [
            RelationNode(ann_id_by_key[_ann_key(src_ws.annotations[n.ann_id])], n.role)
            for n in src.nodes
        ]
        merged.relations[rel_id] = Relation(
            rel_id=rel_id,
            relation_type=src.relation_type,
            nodes=nodes,
            annotator=annotator,
            updated_at=now_iso(),
        )
        if not resolved:
            carried = {labels[v]: "carrier" for v in vis}
            missing = {labels[v]: "missing" for v in range(len(versions)) if v not in vis}
            merged.cue_overlay[rel_id] = CueFlag(
                cue=(Cue.SINGLETON if len(vis) == 1 else Cue.SPAN_PARTIAL).value,
                partners={**carried, **missing},
            )

    merged.refresh_counts()
    return merged


def cue_histogram(overlay: dict[str, CueFlag]) -> Counter:
    return Counter(flag.cue for flag in overlay.values())
