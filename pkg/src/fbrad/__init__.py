"""Feature-bagging ensembles with nested PCA rotations for multivariate time-series anomaly detection."""

__version__ = "0.1.0"
