"""Public entry points for depths on the sphere and Stiefel manifold.

Each depth here is the halfspace depth of tangent-space influences: the
direction ranges over the tangent space at the candidate point, reduced to a
plain unit sphere by an orthonormal tangent basis.  Order-1 depths are
invariant to the (positive) concentration parameter, so it never appears;
order-2 depths need only its sign.
"""

from __future__ import annotations

import numpy as np

from .geometry import TangentBasis, as_unit_vector, sphere_tangent_basis
from .influences import (
    InfluenceSet,
    oc_influence,
    pc_influence,
    vmf_influence,
    watson_influence,
)
from .solver import DepthProblem, DepthResult, SolverConfig, order2_depth, solve_depth


def riemannian_depth_generic(influences: InfluenceSet, tangent: TangentBasis | None,
                             config: SolverConfig | None = None) -> DepthResult:
    """Halfspace depth of user-supplied influences over a direction subspace."""
    return solve_depth(DepthProblem(influences=influences, direction_space=tangent), config)


def watson_depth(Z, mu0, config: SolverConfig | None = None) -> DepthResult:
    """Axial (Watson) depth of a mean axis mu0 for unit data rows.

    Uses the metric-free influences <z_i, mu0>(z_i - <z_i, mu0> mu0) over the
    tangent space at mu0; exact for ambient dimension m <= 3.
    """
    T = watson_influence(Z, mu0)
    return riemannian_depth_generic(T, sphere_tangent_basis(mu0), config)


def vmf_depth(Z, mu0, config: SolverConfig | None = None) -> DepthResult:
    """Directional (von Mises-Fisher) depth of a mean direction mu0.

    Counts <v, z_i> >= 0 over tangent directions v at mu0; the equality
    constraint v' mu0 = 0 distinguishes it from the angular Tukey depth,
    which relaxes it to an inequality.
    """
    T = vmf_influence(Z, mu0)
    return riemannian_depth_generic(T, sphere_tangent_basis(mu0), config)


def vmf_order2_depth(Z, mu0, config: SolverConfig | None = None,
                     criterion: str = "order2") -> DepthResult:
    """Order-2 vMF depth; the curvature terms h_i = <mu0, z_i> are direction-free.

    The product therefore factorizes as (#{h_i >= 0}) x (min over v of the
    half-open count of <v, z_i>), which the joint optimization recovers.
    """
    T = vmf_influence(Z, mu0)
    mu0 = as_unit_vector(mu0, tol=1e-8, name="mu0")
    h = T.rows @ mu0
    return order2_depth(T, h, sphere_tangent_basis(mu0), config, criterion=criterion)


def watson_order2_depth(Z, mu0, kappa_sign: int = 1,
                        config: SolverConfig | None = None,
                        criterion: str = "order2") -> DepthResult:
    """Order-2 Watson depth of an axis mu0; only the concentration sign matters.

    Along the geodesic through mu0 with velocity v the per-sample derivatives
    are g_i proportional to <mu0, z_i><v, z_i> and h_i proportional to
    kappa (<mu0, z_i>^2 - <v, z_i>^2); the positive magnitude of kappa cancels
    in both indicator counts while its sign flips h (concentration vs girdle).
    """
    if kappa_sign not in (1, -1):
        raise ValueError("kappa_sign must be +1 or -1")
    T = watson_influence(Z, mu0)
    mu0 = as_unit_vector(mu0, tol=1e-8, name="mu0")
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    cos_mu = Z @ mu0

    def h_eval(v):
        return kappa_sign * (cos_mu ** 2 - (Z @ v) ** 2)

    return order2_depth(T, h_eval, sphere_tangent_basis(mu0), config, criterion=criterion)


def pc_depth(Z, mu0, U0, config: SolverConfig | None = None) -> DepthResult:
    """Principal-component depth of a center and loading frame (mu0, U0).

    ``mu0=None`` scores the no-intercept model (the center channel is removed
    from both the influences and the direction space); a zero vector keeps
    the channel with a zero center.  Order-1 only: at matched ranks and no
    intercepts this coincides with the orthogonal-complement depth, so it
    cannot tell the most informative subspace from the least informative one.
    """
    T, basis = pc_influence(Z, mu0, U0)
    return solve_depth(DepthProblem(influences=T, direction_space=basis), config)


def oc_depth(Z, mubar0, Ubar0, config: SolverConfig | None = None) -> DepthResult:
    """Orthogonal-complement depth of (mubar0, Ubar0); also the multivariate
    orthogonal regression depth.

    ``mubar0=None`` drops the center channel (no-intercept model).
    """
    T, basis = oc_influence(Z, mubar0, Ubar0)
    return solve_depth(DepthProblem(influences=T, direction_space=basis), config)
