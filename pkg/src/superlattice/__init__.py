"""
Biphoton interference in nonlinear crystal superlattices.

Type-I SPDC in a stack of identical uniaxial crystals separated by gaps:
dispersion, phase matching, the multi-crystal amplitude sum, fringe
analysis, tolerance Monte Carlo and a scenario-driven CLI.
"""

__version__ = "0.1.0"
