"""Experiments on local max-cut under smoothed edge weights.

FLIP dynamics, exact ranks of move matrices, critical blocks, and words that
are sparse at every scale.
"""

__version__ = "0.1.0"
