"""Finite-time driving protocols for gapped quantum systems and exact benchmarks."""
from __future__ import annotations

__version__ = "0.1.0"
