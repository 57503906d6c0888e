"""Numerical lab for block random matrices with dependent entries."""

__version__ = "0.1.0"
