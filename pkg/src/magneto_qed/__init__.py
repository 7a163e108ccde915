"""Constructive quantization toolkit for linear magneto-electric media."""

__version__ = "0.1.0"
