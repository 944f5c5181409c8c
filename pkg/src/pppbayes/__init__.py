"""Bayesian estimation of Poisson point process intensities with transformed Gaussian priors."""

__version__ = "0.1.0"
