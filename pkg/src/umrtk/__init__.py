"""Toolkit for UMR corpora: PENMAN graphs, UMR-to-AMR conversion, Smatch and text metrics."""

__version__ = "0.1.0"

from .convert import ConversionRuleSet, PronounPolicy, convert, default_rules, load_rules, resolve_pronoun
from .corpus import (CorpusSplit, UmrAnnotation, corpus_stats, exclude_ids, is_document_level,
                     parse_umr_file, split_corpus)
from .graph import SemGraph, Triple, parse_penman, serialize_penman, to_triples
from .metrics import EvalPair, bleu, length_stats, meteor_lite
from .scorer_client import ScorerEndpoint, external_score
from .smatch import SmatchResult, corpus_smatch, smatch
