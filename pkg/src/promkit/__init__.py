"""Parametric reduced-order models from DMD on lifted observables."""

__version__ = "0.1.0"
