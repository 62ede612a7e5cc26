"""qrtlab: finite-instance engine for quantum resource theories."""

__version__ = "0.1.0"
