"""Finite, exactly checkable pieces of controlled-topology arguments for crystallographic groups."""

from __future__ import annotations

__version__ = "0.1.0"
