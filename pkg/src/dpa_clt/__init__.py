"""Directed preferential attachment: limiting degree counts and their Gaussian fluctuations."""

__version__ = "0.1.0"

from .params import IndexWindow, ModelParams, P_STAR, validate  # noqa: E402

__all__ = ["IndexWindow", "ModelParams", "P_STAR", "validate", "__version__"]
