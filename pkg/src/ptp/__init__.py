"""Exact and sampled inference for weighted first-order knowledge bases by lifted model counting."""

__version__ = "0.1.0"
