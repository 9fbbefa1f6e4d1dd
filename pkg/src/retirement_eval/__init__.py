"""Retirement-policy evaluation: queue arithmetic, cohort simulation and DiD estimation."""

__version__ = "0.1.0"
