"""Survival ranking with the weighted concordance-index loss and its baselines."""

__version__ = "0.1.0"
