from .core import (  # noqa: F401
    ModelUnavailable,
    ServiceError,
    Session,
    StaleVariant,
    SuggestionService,
    UndecodableImage,
    UnknownSession,
    ValidationFailure,
)
from .app import create_app  # noqa: F401
