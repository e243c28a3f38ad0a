"""CNN-CRF Chinese word segmentation with dictionary-driven training data."""

__version__ = "0.1.0"
