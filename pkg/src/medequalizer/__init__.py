"""Subgroup representation audits and targeted augmentation for synthetic tabular data."""

__version__ = "0.1.0"
