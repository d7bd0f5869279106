"""Benchmarking toolkit for low-light video compression.

Submodules are imported on demand so that lightweight entry points (such as
the mock codec) start without loading numpy.
"""

__version__ = "0.1.0"
