"""Multi-label tag prediction for StackExchange questions."""

__version__ = "0.1.0"
