"""Error taxonomy shared by every module.

Each error carries a stable machine-readable ``code`` so that job results and
HTTP responses can surface failures uniformly as ``{code, message}``.
"""

from __future__ import annotations


class BlendError(Exception):
    """Base class for all domain errors."""

    code = "error"
    http_status = 400

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__

    def as_dict(self) -> dict:
        return {"code": self.code, "message": self.message}


class InvariantViolation(BlendError):
    """A domain type was constructed with values that break its invariants."""

    code = "invariant_violation"


# --- request validation ---

class MissingNode(BlendError):
    code = "missing_node"
    http_status = 404


class MissingImage(BlendError):
    code = "missing_image"
    http_status = 404


class EmptyAspects(BlendError):
    code = "empty_aspects"


class CropOutOfBounds(BlendError):
    code = "crop_out_of_bounds"


class UnsupportedImage(BlendError):
    code = "unsupported_image"
    http_status = 415


# --- model gateway ---

class ProviderUnavailable(BlendError):
    code = "provider_unavailable"
    http_status = 503


class FixtureMiss(BlendError):
    code = "fixture_miss"
    http_status = 503


class Timeout(BlendError):
    code = "timeout"
    http_status = 504


class NoJsonFound(BlendError):
    code = "no_json_found"
    http_status = 502


class SchemaError(BlendError):
    code = "schema_error"
    http_status = 502


# --- repair / diffs ---

class RepairFailed(BlendError):
    code = "repair_failed"
    http_status = 422

    def __init__(self, message: str = "", defects: list | None = None):
        super().__init__(message)
        self.defects = defects or []


class EditNotFound(BlendError):
    code = "edit_not_found"
    http_status = 409

    def __init__(self, message: str = "", edit=None):
        super().__init__(message)
        self.edit = edit


# --- service ---

class NotFound(BlendError):
    code = "not_found"
    http_status = 404


class InvalidProvenance(BlendError):
    code = "invalid_provenance"


class StorageError(BlendError):
    code = "storage_error"
    http_status = 500
