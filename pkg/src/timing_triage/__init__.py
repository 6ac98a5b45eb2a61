"""Automated triage and repair of RTL timing violations."""

__version__ = "0.1.0"
