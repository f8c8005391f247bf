"""Satisfiability-based analysis of XML schemas, queries, and their evolution."""

__version__ = "0.1.0"
