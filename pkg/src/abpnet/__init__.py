"""Backpressure, soft backpressure, dual Newton and accelerated backpressure routing."""

__version__ = "0.1.0"
