"""Penalty Robin-Robin domain decomposition for 2D unilateral multibody contact."""
