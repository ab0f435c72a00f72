from .sessions import MessageRecord, Session, SessionError, SessionStore
from .app import make_app

__all__ = ["SessionStore", "Session", "SessionError", "MessageRecord", "make_app"]
