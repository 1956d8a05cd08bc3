from .config import ServiceConfig, build_service
from .core import JobState, JobStatus, SessionService
from .store import SessionState, SessionStore, apply_event

__all__ = [
    "ServiceConfig",
    "build_service",
    "JobState",
    "JobStatus",
    "SessionService",
    "SessionState",
    "SessionStore",
    "apply_event",
]
