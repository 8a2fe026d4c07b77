"""
Focus: hypernetwork-generated adaptive IIR filters feeding chunked causal attention.
"""

__version__ = '0.1.0'
