"""Two-party secure Transformer inference building blocks."""

__version__ = "0.1.0"
