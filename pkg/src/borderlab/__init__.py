"""Border-rank toolkit: lower bounds, decomposition verification and search."""

from __future__ import annotations

__version__ = "0.1.0"

