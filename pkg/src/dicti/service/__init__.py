"""HTTP job service: API app, content-addressed store, job ledger."""

from .app import create_app
from .config import ServiceConfig

__all__ = ["create_app", "ServiceConfig"]
