"""Event-sequence cohort analytics over coded clinical records."""

__version__ = "0.1.0"
