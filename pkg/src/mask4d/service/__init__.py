"""HTTP service and session management for the placement workflow."""

from .app import create_app
from .sessions import ServiceConfig, SessionManager, default_placement

__all__ = ["create_app", "ServiceConfig", "SessionManager", "default_placement"]
