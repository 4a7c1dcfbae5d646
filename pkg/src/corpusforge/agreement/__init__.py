"""Inter-annotator agreement: matching, cues, scores, reports."""

from .cues import classify_cues, cue_flags, merge_collaborative_seed
from .kernels import matching_backend
from .levels import Cue, MatchLevel
from .matching import MatchedPair, Matching, match_sets
from .report import AgreementReport, CorpusReport, build_agreement_report, corpus_report, report_to_tsv
from .scores import (
    multi_document_score,
    pair_agreement_score,
    relation_agreement,
    relation_match_count,
    score_from_counts,
)

__all__ = [
    "AgreementReport",
    "CorpusReport",
    "Cue",
    "MatchLevel",
    "MatchedPair",
    "Matching",
    "build_agreement_report",
    "classify_cues",
    "corpus_report",
    "cue_flags",
    "match_sets",
    "matching_backend",
    "merge_collaborative_seed",
    "multi_document_score",
    "pair_agreement_score",
    "relation_agreement",
    "relation_match_count",
    "report_to_tsv",
    "score_from_counts",
]
