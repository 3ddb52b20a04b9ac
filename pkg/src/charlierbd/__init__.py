"""Transient moment dynamics of one-dimensional birth-death processes via
Charlier spectral expansions, with a truncated master-equation reference
solver, low-order moment closures, and a thinning-based path simulator.
"""

__version__ = "0.1.0"
