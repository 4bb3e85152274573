"""Two-parameter nonlinear Young calculus: sewing, local times, regularized SDEs and noisy Goursat problems."""
__version__ = "0.1.0"
