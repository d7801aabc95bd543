"""Lameness screening from 13-channel wrist/leg inertial recordings."""

__version__ = "0.1.0"
