"""Certified fidelity bounds for locally purified matrix product density operators."""

from __future__ import annotations

__version__ = "0.1.0"
