"""Dark-pattern text dataset construction and bag-of-words baselines."""

__version__ = "0.1.0"
