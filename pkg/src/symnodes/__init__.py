"""Symmetric, optimization-based nodal distributions for reference elements.

The package builds interpolation node sets for the seven standard finite
element shapes by minimizing a smooth surrogate of the Lebesgue constant
over symmetry-orbit parameters subject to linear constraints, including
cross-element face compatibility.
"""

from .baselines import BaselineKind, baseline_distribution, gll_1d
from .basis import (
    FunctionSpace,
    VandermondeMatrix,
    basis_eval,
    jacobi,
    lagrange_eval,
    space_dimension,
    vandermonde,
)
from .compatibility import (
    FacePrescription,
    build_compatibility_constraints,
    point_prescription,
    verify_face_match,
)
from .errors import (
    ConstraintConflictError,
    DegenerateDistributionError,
    IncompatibleCollectionError,
    InfeasibleParameterError,
    NodeFileError,
    NoViableCollectionError,
    NumericalError,
    OutsideDomainError,
    SymnodesError,
    UnisolvencyError,
    UnsupportedBaselineError,
)
from .geometry import (
    ElementKind,
    FaceEmbedding,
    ReferenceElement,
    cartesian_to_natural,
    contains,
    natural_to_cartesian,
    node_count,
    reference_element,
)
from .metrics import (
    MetricReport,
    evaluate_metrics,
    is_unisolvent,
    lebesgue_constant,
    lebesgue_objective,
    mass_matrix,
)
from .nodefile import read_node_file, write_node_file
from .optimizer import (
    OptimizationProblem,
    OptimizedResult,
    OptimizerConfig,
    assemble_problem,
    minimize,
    objective_and_gradient,
    optimize_nodes,
)
from .quadrature import QuadratureRule, gauss_legendre_1d, quadrature_rule
from .symmetry import (
    ConstrainedOrbit,
    LinearConstraintSet,
    NodalDistribution,
    OrbitCollection,
    SymmetryOrbit,
    attach_constraints,
    enumerate_admissible_collections,
    evaluate_collection,
    evaluate_orbit,
    orbit_parameter_bounds,
    orbits,
)

__version__ = "0.1.0"
