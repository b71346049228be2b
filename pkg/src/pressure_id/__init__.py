"""Dual-branch contrastive user identification on pressure-sensing textiles."""

__version__ = "0.1.0"
