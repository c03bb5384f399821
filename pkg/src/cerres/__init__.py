"""Cerebellar-style residual control for online fault recovery on top of a
frozen nominal controller, with a desk-scale plant simulator and experiment
harness."""

__version__ = "0.1.0"
