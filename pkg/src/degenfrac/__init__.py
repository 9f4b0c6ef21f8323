"""Degenerate fractional Cauchy problems: Mittag-Leffler functions, Caputo
derivatives, Fourier-multiplier solvers and sector-contour constructions."""

__version__ = "0.1.0"
