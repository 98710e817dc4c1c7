from infogain.backends.base import (
    Backend,
    BackendConfig,
    BackendError,
    CallCounter,
    LogprobMode,
    QuestionGenerationError,
)
from infogain.backends.prompts import PromptTemplates, DEFAULT_TEMPLATES, format_history
from infogain.backends.tabular import (
    TabularBackend,
    TabularModel,
    bit_split_model,
    load_tabular_model,
    parse_tabular_model,
)
from infogain.backends.personas import (
    PersonaBackend,
    PersonaEntry,
    PersonaWorld,
    load_persona_world,
    parse_persona_world,
)
from infogain.backends.remote import RemoteBackend, snap_rating

__all__ = [
    "Backend",
    "BackendConfig",
    "BackendError",
    "CallCounter",
    "LogprobMode",
    "QuestionGenerationError",
    "PromptTemplates",
    "DEFAULT_TEMPLATES",
    "format_history",
    "TabularBackend",
    "TabularModel",
    "bit_split_model",
    "load_tabular_model",
    "parse_tabular_model",
    "PersonaBackend",
    "PersonaEntry",
    "PersonaWorld",
    "load_persona_world",
    "parse_persona_world",
    "RemoteBackend",
    "snap_rating",
]
