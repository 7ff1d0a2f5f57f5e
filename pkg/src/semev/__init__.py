"""Sanction-evasion MEV lab: contest equilibrium, race simulation and
episode segmentation of sanctioned-address ledgers."""

__version__ = "0.1.0"
