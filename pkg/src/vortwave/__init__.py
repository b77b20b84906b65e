"""Steady periodic water waves with constant vorticity: surface solver and bound audits."""
from __future__ import annotations

__version__ = "0.1.0"
