"""Numerical verification lab for bosonic entropy power inequalities.

Covariance-matrix calculus for Gaussian states, truncated Fock simulation of
the classical-noise convolution channel, conditional entropy and Fisher
measures, and a harness that checks the inequalities these objects satisfy.
"""

__version__ = "0.1.0"
