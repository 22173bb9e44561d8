"""FastAPI server for functional factor covariance estimation."""

from api.server import app

__all__ = ["app"]
