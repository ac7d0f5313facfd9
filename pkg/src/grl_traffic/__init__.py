"""Graph reinforcement learning lab for connected automated vehicles in mixed traffic."""

__version__ = "0.1.0"
