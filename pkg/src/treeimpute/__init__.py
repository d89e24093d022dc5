"""Iterative tree-ensemble imputation for mixed-type tabular data."""

__version__ = "0.1.0"
