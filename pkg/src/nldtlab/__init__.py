"""Interpretable binary classifiers: CART, RBF SVM, GP and bilevel nonlinear decision trees."""

from .core import Dataset, FeatureTransform, SplitPair, load_csv, save_csv, split

__version__ = "0.1.0"

__all__ = ["Dataset", "FeatureTransform", "SplitPair", "load_csv", "save_csv", "split", "__version__"]
