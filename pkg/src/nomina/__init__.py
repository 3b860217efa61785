"""Registry-backed author name disambiguation for bibliometric records."""

__version__ = "0.1.0"
