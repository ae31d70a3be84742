"""matchkit: a numerical laboratory for quadratic 2D random matching.

Pipeline: correlated point-cloud sampling -> heat-semigroup smoothing ->
linearized elliptic solves -> exponential-map transport plans, with exact
discrete optimal transport as the ground truth at every step.
"""

__version__ = "0.1.0"

from .domain import (
    Grid,
    SpectralField,
    SquareGeometry,
    TorusGeometry,
    basis_field,
    exp_map,
    field_from_grid,
    make_geometry,
    torus_distance,
)

__all__ = [
    "Grid",
    "SpectralField",
    "SquareGeometry",
    "TorusGeometry",
    "basis_field",
    "exp_map",
    "field_from_grid",
    "make_geometry",
    "torus_distance",
]
