"""meshkit: grids, distributed meshes, fields and finite-volume operators on the sphere."""

__version__ = "0.1.0"
