"""Two-player annotation/validation game: state machine, store, HTTP API."""

from .api import create_app
from .service import (
    AnnotationProject,
    AnnotationTask,
    NoTargetSuggestion,
    TaskState,
    WrongStateError,
)

__all__ = [
    "AnnotationProject", "AnnotationTask", "NoTargetSuggestion",
    "TaskState", "WrongStateError", "create_app",
]
