"""Numerical laboratory for relativistic rotators with action -m int sqrt(xdot xdot) f(Q)."""

__version__ = "0.1.0"
