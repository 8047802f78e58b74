"""Exact computer algebra for Z_N-graded exterior calculus with d^N = 0."""

__version__ = "0.1.0"
