"""Feature selection for small tabular classification problems.

Correlation ranking, the weight-magnitude measure and a genetic-algorithm
wrapper, evaluated with a from-scratch MLP and an SMO-trained RBF SVM.
"""

__version__ = "0.1.0"
