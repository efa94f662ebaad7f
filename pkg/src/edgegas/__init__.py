"""Edge statistics of one-dimensional log-gases with a smooth pair interaction."""

__version__ = "0.1.0"
