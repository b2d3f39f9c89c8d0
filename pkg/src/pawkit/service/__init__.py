"""HTTP service exposing dataset generation, training, evaluation,
inference and the edge-budget tools over JSON."""

from .app import app, create_app

__all__ = ["app", "create_app"]
