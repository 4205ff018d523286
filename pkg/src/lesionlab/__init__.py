"""Skin-lesion segmentation, color/texture description and classification."""

__version__ = "0.1.0"
