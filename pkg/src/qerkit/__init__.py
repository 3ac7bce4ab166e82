"""Channel-adapted quantum error recovery toolkit."""

__version__ = "0.1.0"
