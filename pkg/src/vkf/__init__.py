"""Video frame retrieval with tracked binary features and a Hamming kd-tree."""

__version__ = "0.1.0"
