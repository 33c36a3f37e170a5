"""Lustre to Horn clause compiler with invariant extraction and minimization."""

__version__ = "0.1.0"
