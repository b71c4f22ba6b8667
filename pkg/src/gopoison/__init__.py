"""Data-poisoning and Trojan attack toolkit for a small AlphaZero-style Go engine."""

__version__ = "0.1.0"
