"""Local dimensions of self-similar measures satisfying the finite neighbour condition."""

__version__ = "0.1.0"
