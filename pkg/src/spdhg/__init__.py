"""Stochastic primal-dual hybrid gradient solvers with convergence diagnostics."""

__version__ = "0.1.0"
