"""Operator-differential forms, Volterra inverses and root-function spectra."""

__version__ = "0.1.0"
