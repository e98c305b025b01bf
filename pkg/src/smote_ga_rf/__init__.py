"""SMOTE oversampling, genetic-algorithm feature selection and random forests
for small, imbalanced tabular datasets."""

__version__ = "0.1.0"
