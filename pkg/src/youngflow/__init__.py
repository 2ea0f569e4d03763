"""Young-regime calculus on sampled Hölder paths.

Drivers with Hölder exponent above 1/2, left-point Young integrals, Euler
schemes for ``dx = X(x) dZ`` and their flows, and the splitting of flows
into horizontal and vertical factors for linear systems, the frame bundle
of the sphere, and SO(3) over S^2.
"""

from .errors import (
    FoliationError,
    InputError,
    InvariantError,
    ManifoldError,
    RangeError,
    YoungConditionError,
    YoungflowError,
)
from .paths import (
    HolderEstimate,
    SampledPath,
    estimate_holder,
    gen_fbm,
    gen_smooth,
    gen_weierstrass,
    sample_function,
    stack_paths,
    uniform_grid,
)
from .young import IntegrandPath, integrate_one_form, ito_residual, young_integrate
from .yde import (
    Trajectory,
    VectorFieldFamily,
    inverse_flow,
    ito_kunita_check,
    linear_field,
    solve_euler,
    solve_flow,
    variational_jacobian,
    zero_field,
)
from .linear import (
    BlockDecomposition,
    LinearSystem,
    MatrixPath,
    decompose_blocks,
    decompose_foliated,
    decompose_via_yde,
    detect_explosion,
    fundamental_solution,
    schur_foliation,
)
from .manifolds import LevelSet, SO3Manifold, Sphere, path_as_yde_residual, solve_yde_on_manifold
from .bundles import (
    ConnectionForm,
    FramePath,
    antidevelop,
    covariant_derivative,
    develop,
    horizontal_lift,
    parallel_transport,
)
from .homogeneous import (
    decompose_homogeneous,
    horizontal_factor,
    solve_right_invariant,
    trivial_bundle_decompose,
)

__version__ = "0.1.0"

__all__ = [
    "FoliationError",
    "InputError",
    "InvariantError",
    "ManifoldError",
    "RangeError",
    "YoungConditionError",
    "YoungflowError",
    "HolderEstimate",
    "SampledPath",
    "estimate_holder",
    "gen_fbm",
    "gen_smooth",
    "gen_weierstrass",
    "sample_function",
    "stack_paths",
    "uniform_grid",
    "IntegrandPath",
    "integrate_one_form",
    "ito_residual",
    "young_integrate",
    "Trajectory",
    "VectorFieldFamily",
    "inverse_flow",
    "ito_kunita_check",
    "linear_field",
    "solve_euler",
    "solve_flow",
    "variational_jacobian",
    "zero_field",
    "BlockDecomposition",
    "LinearSystem",
    "MatrixPath",
    "decompose_blocks",
    "decompose_foliated",
    "decompose_via_yde",
    "detect_explosion",
    "fundamental_solution",
    "schur_foliation",
    "LevelSet",
    "SO3Manifold",
    "Sphere",
    "path_as_yde_residual",
    "solve_yde_on_manifold",
    "ConnectionForm",
    "FramePath",
    "antidevelop",
    "covariant_derivative",
    "develop",
    "horizontal_lift",
    "parallel_transport",
    "decompose_homogeneous",
    "horizontal_factor",
    "solve_right_invariant",
    "trivial_bundle_decompose",
]
