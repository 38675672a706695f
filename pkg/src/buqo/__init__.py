"""Bayesian uncertainty quantification by optimization for imaging
inverse problems: MAP estimation and structure hypothesis tests driven
by pluggable inpainting operators."""

__version__ = "0.1.0"
