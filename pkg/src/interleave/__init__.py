"""Optimized upper bounds on the interleaving distance between mapper graphs."""
__version__ = "0.1.0"
