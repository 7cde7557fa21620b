"""skycat: an HTM-indexed astronomical catalog engine and query service."""

__version__ = "0.1.0"
