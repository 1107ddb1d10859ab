"""maskcc: leak-aware code generation for masked straight-line kernels."""

__version__ = "0.1.0"
