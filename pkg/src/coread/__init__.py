"""Dialogic question generation and serving for parent-child co-reading.

Generates CROWD-typed questions from paginated story text with an LLM,
screens them against an encoded educator rubric with counter-example
feedback, and serves accepted questions to a reader interface.
"""

from .backends import (
    BackendError,
    ChatBackend,
    ChatMessage,
    ChatRequest,
    ChatResponse,
    DEFAULT_MODEL,
    LiveBackend,
    LiveBackendConfig,
    ReplayBackend,
    ReplayCacheMissError,
    ScriptedBackend,
    ScriptedExhaustedError,
    TransportError,
    request_digest,
)
from .evaluation import (
    AblationReport,
    AblationRun,
    RatingRecord,
    System,
    cohens_kappa,
    run_ablation,
    suitability_rate,
)
from .loop import (
    AttemptRecord,
    GenerationOutcome,
    LoopConfig,
    PageGenerationError,
    generate_for_page,
    generate_for_story,
)
from .prompts import PromptLibrary, bundled_library
from .review import (
    CounterExample,
    InconclusiveCriterionError,
    JudgeParseError,
    SuitabilityVerdict,
    build_suitability_prompt,
    evaluate,
    parse_verdict,
    to_counter_example,
)
from .rubric import (
    CRITERIA,
    CROWD_ORDER,
    CriterionMode,
    CriterionResult,
    QuestionKind,
    RubricCriterion,
    applicable_types,
    criteria_for,
    detect_repetition_or_rhyme,
    registry_audit_text,
    structural_check,
    type_level,
)
from .service import INFO_POPUP_TEXT, create_app
from .store import QuestionRecord, SessionEvent, Store
from .stories import (
    Page,
    Story,
    StoryError,
    StoryFormatError,
    StoryValidationError,
    context_window,
    fixture_names,
    load_fixture,
    parse_story,
    serialize_story,
)
from .synthesis import (
    CandidateQuestion,
    GenerationParseError,
    ResponseSchemaError,
    build_generation_prompt,
    parse_generation_response,
    synthesize,
)

__version__ = "0.1.0"
