"""Negotiations: a model of concurrency built from multiparty atoms.

Soundness checking, summaries by state elimination, reduction rules and
instance generators.
"""

from .analysis import Classification, SoundnessVerdict, check_soundness, classify, is_acyclic
from .fileformat import ParseError, parse, serialize
from .model import Atom, Domain, Negotiation, Relation, Transformer, validate
from .reduction import metrics, reduce_sdan, reduce_weakly_deterministic
from .semantics import Marking, reach, step
from .summary import Summary, brute_force_summary, equivalent, summarize_statespace

__all__ = [
    "Atom", "Classification", "Domain", "Marking", "Negotiation", "ParseError", "Relation", "SoundnessVerdict",
    "Summary", "Transformer", "brute_force_summary", "check_soundness", "classify", "equivalent", "is_acyclic",
    "metrics", "parse", "reach", "reduce_sdan", "reduce_weakly_deterministic", "serialize", "step",
    "summarize_statespace", "validate",
]
