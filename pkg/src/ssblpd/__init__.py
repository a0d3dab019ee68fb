"""Detection probability of 5G NR SSB transmissions by a passive eavesdropper."""

__version__ = "0.1.0"
