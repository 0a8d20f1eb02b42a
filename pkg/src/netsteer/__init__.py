"""netsteer: steering networked excitatory point processes by edge intervention."""

__version__ = "0.1.0"
