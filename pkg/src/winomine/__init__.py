"""Mining, filtering, scoring, and evaluation of masked pronoun-resolution examples."""

__version__ = "0.1.0"
