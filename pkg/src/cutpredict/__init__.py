"""Predict which methods added in a pull request get deleted before merge."""

__version__ = "0.1.0"
