"""Minimax risk bounds and risk-optimal estimators for LAMN models under asymmetric loss."""

__version__ = "0.1.0"
