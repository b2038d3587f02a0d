"""Goodness-of-fit testing for temporal point processes via an innovation martingale transform."""
