"""Desk-scale lab for adversarial mixture density vehicle-following policies."""

__version__ = "0.1.0"
