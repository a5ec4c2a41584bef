"""Desk-scale brain-tumor analysis pipeline with objective and subjective
evaluation: phantom data generation, a from-scratch classifier and
anchor-based localizer, Prewitt fine segmentation, quality metrics, and a
double-stimulus rating service."""

__version__ = "0.1.0"
