"""Numerical laboratory for u_tt + (-Delta)^sigma u + (-Delta)^(sigma/2) u_t = |u|^p.

Modules: ``theory`` (closed-form conditions and rates), ``spectral`` (periodic
grids, exact linear propagator), ``solver`` (ETD time stepping and Picard
iteration), ``harness`` (experiments and reports), ``cli``.
"""

__version__ = "0.1.0"
