"""storydeck: compose slide-deck data stories from charts.

Pipeline: ingest a dataset and chart specs, mine data facts, relate facts at
the data level, ask an LLM for knowledge-grounded meta relations (with
automatic entity verification), organize selected facts into a slide deck
under capacity and minimum-alternation constraints, and export the result.
"""

from .errors import StorydeckError
from .export import export_deck, parse_story, serialize_story
from .facts import describe_fact, mine_facts, score_fact
from .gateway import CompletionParams, Gateway, gateway_from_flag, mock_load
from .ingest import ChartContext, ChartSpec, load_dataset, parse_chart_spec, resolve_chart
from .meta import (
    IdentificationRequest,
    aggregate_score,
    build_identification_prompt,
    parse_identification_response,
    suggest_meta_relations,
    verify_entities,
)
from .model import (
    Column,
    DataFact,
    DataRelation,
    Dataset,
    FactEntry,
    KnowledgeDoc,
    MetaRelation,
    NarrativeContext,
    Slide,
    StoryDeck,
    evaluate_subspace,
    validate_dataset,
)
from .organizer import Placement, apply_placement, fallback_placement, parse_placement
from .relations import compute_data_relations, iou
from .sessions import SessionManager

__version__ = "0.1.0"

__all__ = [
    "ChartContext",
    "ChartSpec",
    "Column",
    "CompletionParams",
    "DataFact",
    "DataRelation",
    "Dataset",
    "FactEntry",
    "Gateway",
    "IdentificationRequest",
    "KnowledgeDoc",
    "MetaRelation",
    "NarrativeContext",
    "Placement",
    "SessionManager",
    "Slide",
    "StoryDeck",
    "StorydeckError",
    "aggregate_score",
    "apply_placement",
    "build_identification_prompt",
    "compute_data_relations",
    "describe_fact",
    "evaluate_subspace",
    "export_deck",
    "fallback_placement",
    "gateway_from_flag",
    "iou",
    "load_dataset",
    "mine_facts",
    "mock_load",
    "parse_chart_spec",
    "parse_identification_response",
    "parse_placement",
    "parse_story",
    "resolve_chart",
    "score_fact",
    "serialize_story",
    "suggest_meta_relations",
    "validate_dataset",
    "verify_entities",
]
