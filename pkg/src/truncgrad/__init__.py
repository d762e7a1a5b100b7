"""Certified truncation bounds for equilibrium reward gradients of Markov chains."""

__version__ = "0.1.0"
