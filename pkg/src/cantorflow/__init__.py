"""Exact computations for Cantor minimal systems, their suspension flows and
the K-theory of the associated orbit-breaking algebras."""

__version__ = "0.1.0"
