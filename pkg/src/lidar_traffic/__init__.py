"""Statistical traffic models for automotive LiDAR frame sizes."""

__version__ = "0.1.0"
