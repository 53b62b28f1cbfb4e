"""Subwavelength resonator chains: capacitance, multipole and topology tools."""

__version__ = "0.1.0"
