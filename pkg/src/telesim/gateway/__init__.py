"""HTTP + WebSocket face of the platform."""

from .app import ERROR_STATUS, create_app

__all__ = ["create_app", "ERROR_STATUS"]
