"""Single-copy entanglement manipulation toolkit: SLOCC fidelity, teleportation and activation."""

__version__ = "0.1.0"
