"""Diversity-sampled few-shot synthetic note generation and evaluation."""

__version__ = "0.1.0"
