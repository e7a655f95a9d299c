"""Synthetic trajectories, sensor streams and Monte-Carlo experiments."""
