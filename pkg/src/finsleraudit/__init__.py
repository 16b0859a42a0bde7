"""Exact symbolic audit of (alpha, beta)-metric spray and conformal-change formulas."""

__version__ = "0.1.0"
