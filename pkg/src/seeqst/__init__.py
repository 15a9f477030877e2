"""Selective tomography of density-matrix subsets with paired GHZ-basis measurements."""

__version__ = "0.1.0"
