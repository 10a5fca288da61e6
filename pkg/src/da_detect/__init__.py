"""Domain adaptive two-stage object detection on synthetic scenes."""

__version__ = "0.1.0"
