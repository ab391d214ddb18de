"""Omni-potential flows: exact polynomial families, commutation checks, 2-D WKB flows, MAK."""

__version__ = "0.1.0"
