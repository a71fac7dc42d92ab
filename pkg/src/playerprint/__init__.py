"""Player fingerprinting from replay event streams."""

__version__ = "0.1.0"
