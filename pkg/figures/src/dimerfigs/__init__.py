"""Figure rendering for dimerwork CSV output."""

__version__ = "0.1.0"
