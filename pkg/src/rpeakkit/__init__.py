"""R-peak detection by distance-transform regression, with classic baselines."""

__version__ = "0.1.0"
