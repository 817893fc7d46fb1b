"""Numerical laboratory for a compressible two-fluid model with algebraic
pressure closure, its incompressible limit, and low-Mach convergence-rate
measurement on periodic tori."""

__version__ = "0.1.0"
