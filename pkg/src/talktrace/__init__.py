"""talktrace: evidence attribution for multi-turn diagnostic dialogues.

Given a dialogue and a recommended response, find the teacher sentence that
supports the recommendation (turn-level likelihood gains, then sentence-level
necessity/sufficiency scoring), generate a grounded explanation, and evaluate
attribution quality against annotated ground truth.
"""

from .attribution import (
    AttributionResult,
    Method,
    SentenceScore,
    TurnGain,
    attribute,
    attribute_flat,
    attribute_hierarchical,
    attribute_similarity,
    phi_scores,
    select_turn,
    turn_gains,
)
from .chat import ChatBackend, ChatBackendConfig, ScriptedChatBackend
from .dialogue import (
    Dialogue,
    Role,
    Sentence,
    TargetResponse,
    Turn,
    load_dialogue,
    segment_sentences,
    serialize_prefix,
    serialize_teacher_context,
)
from .errors import (
    ChatBackendError,
    CorpusError,
    NoEvidenceError,
    ScorerBackendError,
    ScorerProtocolError,
    TalktraceError,
)
from .evaluation import (
    AnnotationSet,
    BenchmarkCase,
    MetricsReport,
    cohen_kappa,
    evaluate,
    generate_synthetic,
    load_corpus,
    save_corpus,
)
from .explanation import Explanation, explain
from .scoring import (
    CachingScorer,
    LexicalScorer,
    RemoteScorer,
    ScoreCache,
    ScoreRequest,
    Scorer,
    ScorerBackendConfig,
    build_scorer,
    lexical_score,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationSet",
    "AttributionResult",
    "BenchmarkCase",
    "CachingScorer",
    "ChatBackend",
    "ChatBackendConfig",
    "ChatBackendError",
    "CorpusError",
    "Dialogue",
    "Explanation",
    "LexicalScorer",
    "Method",
    "MetricsReport",
    "NoEvidenceError",
    "RemoteScorer",
    "Role",
    "ScoreCache",
    "ScoreRequest",
    "Scorer",
    "ScorerBackendConfig",
    "ScorerBackendError",
    "ScorerProtocolError",
    "Sentence",
    "SentenceScore",
    "TalktraceError",
    "TargetResponse",
    "Turn",
    "TurnGain",
    "attribute",
    "attribute_flat",
    "attribute_hierarchical",
    "attribute_similarity",
    "cohen_kappa",
    "evaluate",
    "explain",
    "generate_synthetic",
    "lexical_score",
    "load_corpus",
    "load_dialogue",
    "phi_scores",
    "save_corpus",
    "segment_sentences",
    "select_turn",
    "serialize_prefix",
    "serialize_teacher_context",
    "turn_gains",
    "build_scorer",
]
