"""Bi-fidelity l1-regularized training of surrogate networks."""
__version__ = "1.0.0"
