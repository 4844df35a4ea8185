from .dataset import (
    FEVER_SPLIT,
    CandidateSet,
    Split,
    SplitSpec,
    assemble_dataset,
    candidate_set,
    coverage_stats,
    proportional_sizes,
    split_claims,
)
from .io import read_claims, read_corpus, read_dataset, write_claims, write_corpus, write_dataset
from .synthetic import make_synthetic
from .text import PAD, UNK, Claim, Document, Vocabulary, tokenize
from .tfidf import TfidfIndex, build_tfidf_index, mine_candidates

__all__ = [
    "PAD", "UNK", "FEVER_SPLIT", "CandidateSet", "Claim", "Document", "Split", "SplitSpec",
    "TfidfIndex", "Vocabulary", "assemble_dataset", "build_tfidf_index", "candidate_set",
    "coverage_stats", "make_synthetic", "mine_candidates", "proportional_sizes", "read_claims",
    "read_corpus", "read_dataset", "split_claims", "tokenize", "write_claims", "write_corpus",
    "write_dataset",
]
