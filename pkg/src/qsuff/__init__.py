"""Sufficient statistics, recovery maps and divergences for finite quantum experiments."""
