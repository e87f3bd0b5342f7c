"""Multi-robot learn-and-cover simulation: GP / random-feature GP density
learning coupled with Voronoi coverage control."""

__version__ = "0.1.0"
