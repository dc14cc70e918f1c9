"""Exception hierarchy shared by every module.

The API layer maps these onto HTTP status codes via ``http_status`` and the
machine-readable ``code`` carried by each class, so raising the right type
anywhere in the stack produces the right wire error.
"""

from __future__ import annotations


class CoModelerError(Exception):
    """Base class for all operational errors."""

    code = "internal"
    http_status = 500


class ValidationFailure(CoModelerError):
    """A request or event draft violates a precondition."""

    code = "validation"
    http_status = 400


class ImageDecodeError(ValidationFailure):
    code = "bad_image"


class PayloadTooLargeError(ValidationFailure):
    code = "payload_too_large"
    http_status = 413


class NotFoundError(CoModelerError):
    code = "not_found"
    http_status = 404


class BlobMissingError(NotFoundError):
    code = "blob_missing"


class BlobCorruptError(CoModelerError):
    """Stored bytes no longer hash to their name; the store is damaged."""

    code = "blob_corrupt"
    http_status = 500


class ConflictError(CoModelerError):
    code = "conflict"
    http_status = 409


class DuplicateNameError(ConflictError):
    code = "duplicate_name"


class DedupeKeyConflictError(ConflictError):
    code = "dedupe_key_conflict"


class CursorAheadError(ConflictError):
    """Client cursor is ahead of the server log; the client state is corrupt."""

    code = "cursor_ahead"


class TrainingPrerequisiteError(ConflictError):
    code = "training_prerequisite"


class TrainingInProgressError(ConflictError):
    code = "training_in_progress"


class NoModelError(ConflictError):
    code = "no_model"


class GameSessionError(ConflictError):
    code = "game_session"


class SessionInProgressError(GameSessionError):
    code = "session_in_progress"


class SessionFinishedError(GameSessionError):
    code = "session_finished"


class SessionRunningError(GameSessionError):
    code = "session_running"


class StaleRoundError(GameSessionError):
    code = "stale_round"
