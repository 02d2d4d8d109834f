"""Riemann-Hilbert toolkit for the periodic Camassa-Holm equation.

Pipeline: initial data -> scattering along the Lax pair -> trace function
and sheeted global-relation root -> master Riemann-Hilbert problem in the
sine-variable frame -> field reconstruction and identity-based verification.
"""

__version__ = "0.1.0"
