"""Induction of concept-node extraction dictionaries from annotated clauses."""

from .semantic import HierarchyError, Lexicon, SemanticHierarchy, load_hierarchy, load_lexicon
from .instances import (
    Buffer, BufferRole, CnLabel, CorpusError, Instance, InstanceDb, Kind, NULL_VERB,
    Slot, Voice, dump_corpus, load_corpus,
)
from .definition import (
    BufferConstraints, CnDefinition, Extraction, extract, extract_all, matches, subsumes,
)
from .induction import (
    Dictionary, ErrorReport, InductionConfig, build_initial_definition, error_rate,
    filter_by_coverage, find_most_similar, induce, similarity, unify,
)

__version__ = "0.1.0"
