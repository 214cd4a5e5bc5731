"""Numerical construction of a Delaunay-type family of CMC hypersurfaces in S^4."""
