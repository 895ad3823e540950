"""depthforge: generalized Tukey depths for curved and nonsmooth estimation problems.

Center-outward ranking of candidate estimators through halfspace depths of
per-sample influence vectors: tangent-space depths on the sphere and Stiefel
manifold, and slack-variable depths for nonnegative, sparse, and reduced-rank
regression, plus the reference estimators those depths certify.
"""

from .estimators import (
    FitResult,
    deepest_search,
    fit_piq,
    fit_rrr,
    fit_tisp,
    make_rrr_sampler,
    make_sparse_sampler,
)
from .geometry import (
    TangentBasis,
    VmfLoss,
    WatsonLoss,
    orthonormal_complement,
    sphere_geodesic_derivatives,
    sphere_tangent_basis,
    sphere_tangent_project,
    stiefel_tangent_basis,
)
from .influences import (
    HuberLoss,
    InfluenceSet,
    LogisticLoss,
    SquaredLoss,
    get_loss,
    glm_influence,
    location_influence,
    oc_influence,
    pc_influence,
    regression_influence,
    rrr_influence,
    sparse_rrr_influence,
    subspace_reparametrize,
    vmf_influence,
    watson_influence,
)
from .riemannian import (
    oc_depth,
    pc_depth,
    riemannian_depth_generic,
    vmf_depth,
    vmf_order2_depth,
    watson_depth,
    watson_order2_depth,
)
from .slack import (
    default_lambda,
    nonnegative_regression_depth,
    rrr_depth,
    rrr_slack_bound,
    sparse_rrr_depth,
    theta_depth,
    theta_sharp_depth,
)
from .solver import (
    DepthProblem,
    DepthResult,
    SlackChannel,
    SolverConfig,
    evaluate_01,
    exact_depth_2d,
    order2_depth,
    slack_step_01,
    slack_step_smooth,
    solve_depth,
)
from .thresholding import (
    GammaVector,
    ThresholdRule,
    check_rrr_fixed_point,
    check_theta_fixed_point,
    gamma_vector,
    matrix_quantile_threshold,
    penalty_value,
    quantile_threshold,
    threshold,
    threshold_inverse,
)

__version__ = "0.1.0"
