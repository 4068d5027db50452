"""Traffic anomaly detection from flow-interaction graphs and intuitionistic fuzzy sets."""

__version__ = "0.1.0"
