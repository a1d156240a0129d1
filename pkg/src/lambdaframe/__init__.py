"""Map-reduce over columnar datasets on serverless function backends."""

__version__ = "0.1.0"
