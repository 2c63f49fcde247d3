"""Estimation bounds for a leader-follower multistatic radar with wireless sync."""

__version__ = "0.1.0"
