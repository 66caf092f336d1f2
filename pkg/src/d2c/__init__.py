"""Causal-link prediction from asymmetric Markov-blanket descriptors."""

__version__ = "0.1.0"
