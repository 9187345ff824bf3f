"""Multi-view clustering with bi-level decoupling and consistency learning."""

__version__ = "0.1.0"
