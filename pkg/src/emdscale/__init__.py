"""Multi-scale time-series econometrics built on empirical mode decomposition."""

__version__ = "0.1.0"
