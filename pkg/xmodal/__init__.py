"""
Single-stream cross-modal retrieval with semantic λ@K evaluation
"""

__version__ = "0.1.0"
