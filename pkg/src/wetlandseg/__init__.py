"""Wetland extraction from scanned historical maps.

A compact pipeline: a from-scratch fully-convolutional classifier trained
with Adam on tiled georeferenced rasters, evaluated with spatial 10-fold
cross-validation, and post-processed into a filtered GIS vector layer.
"""

__version__ = "0.1.0"

from wetlandseg.nn import active_backend, available_backends

__all__ = ["__version__", "active_backend", "available_backends"]
