"""Greenberg's conjecture at p = 3 for real quadratic fields: the modules C(f) = Lambda/J."""

__version__ = "1.0.0"
