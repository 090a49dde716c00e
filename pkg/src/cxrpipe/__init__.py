"""Chest X-ray classification pipeline: enhancement, features, resampling,
classical and neural classifiers, metrics, and local explanations."""

__version__ = "0.1.0"
