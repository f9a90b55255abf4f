"""Boundary-adapted calibration fields and transported weights for planar
two-phase flow with a 90 degree contact angle, with numerical verification."""

__version__ = "0.1.0"
