"""Filtered manifolds, osculating groups and exponential charts of the tangent groupoid."""

from .graded_algebra import (
    GradedNilpotentLieAlgebra, bch_product, bch_inverse, bracket, dilate, verify_algebra,
)
from .polyfields import Polynomial, PolyVectorField, apply, evaluate, lie_bracket, parse_polynomial
from .filtration import (
    FilteredChart, Splitting, canonical_splitting, frame_coordinates_at, osculating_algebra_at,
    validate_filtration,
)
from .tangent_algebroid import (
    GradedSection, HSection, algebroid_bracket, ev0H, ev_t, membership_XH, phi_psi,
    phi_psi_inverse, transition_matrix,
)
from .exponential_charts import (
    ChartDomain, GradedConnection, Osculating, Pair, chart_log, deformation_limit_check,
    exp_geodesic, global_chart, groupoid_exp, injectivity_probe, multiply,
    validate_graded_connection,
)

__version__ = "0.1.0"
