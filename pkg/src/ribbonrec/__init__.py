"""Ribbon recommender engine and offline A/B/C experiment harness."""
__version__ = "0.1.0"
