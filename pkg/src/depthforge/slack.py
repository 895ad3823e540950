"""Slack-channel depth assemblies for nonsmooth, sparse, and low-rank families.

Each assembly wires a gradient influence set to a SlackChannel expressing the
family's inequality-type optimality conditions: nonnegative regression gets a
one-sided unbounded box on the zero set, the thresholding depths get a box of
radius lambda (or a data-driven radius for the cardinality-constrained form),
and reduced-rank regression gets a spectral ball embedded through the
orthogonal complements of the candidate's singular factors.
"""

from __future__ import annotations

import numpy as np

from .geometry import as_stiefel
from .influences import (
    InfluenceSet,
    get_loss,
    glm_influence,
    regression_influence,
    rrr_influence,
    sparse_rrr_influence,
)
from .solver import DepthProblem, DepthResult, SlackChannel, SolverConfig, solve_depth
from .thresholding import ThresholdRule, discontinuity_gap, gamma_vector

RANK_TOL = 1e-8


def default_lambda(X, y, beta0, c: float = 2.0) -> float:
    """Data-driven threshold sigma_hat * sqrt(c n log p), c = 2 by default.

    sigma_hat is the median-absolute-deviation scale of the residuals at
    beta0 (scaled to be consistent at the normal).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    beta0 = np.asarray(beta0, dtype=float).ravel()
    n, p = X.shape
    resid = y - X @ beta0
    sigma_hat = 1.4826 * float(np.median(np.abs(resid - np.median(resid))))
    return sigma_hat * float(np.sqrt(c * n * np.log(max(p, 2))))


def nonnegative_regression_depth(X, y, beta0, config: SolverConfig | None = None) -> DepthResult:
    """Depth of regression influences minus s/n with s >= 0 supported on the zero set.

    For beta0 strictly positive the slack vanishes and this is the plain
    regression depth.  With boundary zeros the one-sided, unbounded slack is
    handled exactly through the scalar-shift reduction (the count is driven
    past the extreme breakpoint whenever the direction has a positive free
    coordinate), which often gives much lower depth.
    """
    beta0 = np.asarray(beta0, dtype=float).ravel()
    if np.any(beta0 < 0):
        raise ValueError("beta0 must be entrywise nonnegative")
    T = regression_influence(X, y, beta0)
    free = np.nonzero(beta0 == 0.0)[0]
    chan = SlackChannel(kind="box", bound=np.inf, free_idx=free, sign=-1.0, one_sided=True)
    problem = DepthProblem(influences=T, slack=chan)
    return solve_depth(problem, config)


def theta_depth(X, y, beta0, rule: ThresholdRule, loss="squared",
                config: SolverConfig | None = None) -> DepthResult:
    """Thresholding depth of beta0 for the rule's penalized problem.

    Influences are the gradient influences x_i l0'(x_i' beta0; y_i) carrying
    the fixed offset gamma/n (zero for the hard rule), with a box slack of
    radius lambda on the zero set of beta0.
    """
    beta0 = np.asarray(beta0, dtype=float).ravel()
    T = glm_influence(X, y, beta0, loss)
    gamma = gamma_vector(rule, beta0).values
    offset = None
    if np.any(gamma != 0.0):
        offset = gamma / T.n
    T = InfluenceSet(T.rows, offset=offset)
    free = np.nonzero(beta0 == 0.0)[0]
    chan = SlackChannel(kind="box", bound=rule.lam, free_idx=free, sign=1.0)
    problem = DepthProblem(influences=T, slack=chan)
    result = solve_depth(problem, config)
    # the sup-inverse behind gamma is unreliable within ~1e-8 of a rule
    # discontinuity; surface the proximity so callers can judge
    support_vals = beta0[beta0 != 0.0]
    if support_vals.size:
        result.diagnostics["gamma_discontinuity_gap"] = discontinuity_gap(rule, support_vals)
    return result


def theta_sharp_depth(X, y, beta0, q: int, loss="squared",
                      config: SolverConfig | None = None) -> DepthResult:
    """Cardinality-constrained sparsity depth of a q-sparse beta0.

    The slack lives on the zero set with sup-norm bound equal to the largest
    gradient magnitude over the support columns, computed from the data; no
    gamma offset and no step-size constant enter (both cancel).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    beta0 = np.asarray(beta0, dtype=float).ravel()
    support = np.nonzero(beta0 != 0.0)[0]
    if support.size != q:
        raise ValueError(f"beta0 has support size {support.size}, expected q = {q}")
    loss_obj = get_loss(loss)
    T = glm_influence(X, y, beta0, loss_obj)
    deriv = loss_obj.derivative(X @ beta0, y)
    bound = float(np.max(np.abs(X[:, support].T @ deriv))) if support.size else 0.0
    free = np.nonzero(beta0 == 0.0)[0]
    chan = SlackChannel(kind="box", bound=bound, free_idx=free, sign=1.0)
    problem = DepthProblem(influences=T, slack=chan)
    return solve_depth(problem, config)


def _certified_factors(B0, r: int):
    """Compact SVD factors of an (approximately) rank-r matrix, with complements.

    Certifies sigma_{r+1}/sigma_1 < 1e-8 and sigma_r/sigma_1 >= 1e-8; the full
    SVD supplies the orthogonal complements, sign-fixed for reproducibility
    (first sufficiently large entry of each column made positive).
    """
    B0 = np.atleast_2d(np.asarray(B0, dtype=float))
    p, m = B0.shape
    if not 1 <= r <= min(p, m):
        raise ValueError(f"rank r must be in [1, {min(p, m)}], got {r}")
    U, sv, Vt = np.linalg.svd(B0, full_matrices=True)
    top = sv[0] if sv.size else 0.0
    if top == 0.0:
        raise ValueError("B0 is the zero matrix; it has no rank-r factorization")
    if sv[r - 1] / top < RANK_TOL:
        raise ValueError(f"rank(B0) < {r}: sigma_{r}/sigma_1 = {sv[r - 1] / top:.3e}")
    if r < sv.size and sv[r] / top >= RANK_TOL:
        raise ValueError(f"rank(B0) > {r}: sigma_{r + 1}/sigma_1 = {sv[r] / top:.3e}")

    def sign_fix(W):
        W = W.copy()
        for j in range(W.shape[1]):
            nz = np.nonzero(np.abs(W[:, j]) > 1e-12)[0]
            if nz.size and W[nz[0], j] < 0:
                W[:, j] = -W[:, j]
        return W

    P = U[:, :r]
    Q = Vt[:r, :].T
    P_perp = sign_fix(U[:, r:])
    Q_perp = sign_fix(Vt[r:, :].T)
    return P, Q, P_perp, Q_perp


def rrr_slack_bound(X, Y, B0) -> float:
    """Spectral norm of the doubly projected gradient P_perp' X'(X B0 - Y) Q_perp.

    Zero by convention when either complement is empty (full-rank B0).
    """
    B0 = np.atleast_2d(np.asarray(B0, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    sv = np.linalg.svd(B0, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        raise ValueError("B0 is the zero matrix")
    r = int(np.sum(sv / sv[0] >= RANK_TOL))
    _, _, P_perp, Q_perp = _certified_factors(B0, r)
    if P_perp.shape[1] == 0 or Q_perp.shape[1] == 0:
        return 0.0
    G = P_perp.T @ (X.T @ (X @ B0 - Y)) @ Q_perp
    return float(np.linalg.norm(G, 2))


def rrr_depth(X, Y, B0, r: int, config: SolverConfig | None = None) -> DepthResult:
    """Rank-r reduced-rank regression depth of B0.

    The slack is a spectral ball embedded as P_perp L Q_perp' with bound
    ||P_perp' X'(X B0 - Y) Q_perp||_2; at full rank the complement vanishes,
    the slack dies, and this is the multivariate regression depth.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    B0 = np.atleast_2d(np.asarray(B0, dtype=float))
    p, m = B0.shape
    _, _, P_perp, Q_perp = _certified_factors(B0, r)
    T = rrr_influence(X, Y, B0)
    if P_perp.shape[1] == 0 or Q_perp.shape[1] == 0:
        bound = 0.0
    else:
        G = P_perp.T @ (X.T @ (X @ B0 - Y)) @ Q_perp
        bound = float(np.linalg.norm(G, 2))
    chan = SlackChannel(
        kind="spectral", bound=bound, left=P_perp, right=Q_perp, mat_shape=(p, m)
    )
    problem = DepthProblem(influences=T, slack=chan)
    return solve_depth(problem, config)


def sparse_rrr_depth(X, Y, A0, U0, q: int, config: SolverConfig | None = None) -> DepthResult:
    """Depth of a sparse loading matrix and Stiefel factor pair (A0, U0).

    Combines the Stiefel tangent space at U0 (loading-direction block) with a
    box slack on vec(A0)'s zero set in the free block; the bound is the
    largest gradient magnitude over the support of vec(A0), matching the
    cardinality-constrained depth it reduces to when m = r = 1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    U0 = as_stiefel(U0, name="U0")
    p, r = A0.shape
    m = U0.shape[0]
    vecA = A0.ravel(order="F")
    support = np.nonzero(vecA != 0.0)[0]
    if support.size != q:
        raise ValueError(f"vec(A0) has support size {support.size}, expected q = {q}")
    T, basis = sparse_rrr_influence(X, Y, A0, U0)
    grad = (X.T @ (X @ A0 - Y @ U0)).ravel(order="F")
    bound = float(np.max(np.abs(grad[support]))) if support.size else 0.0
    free_local = np.nonzero(vecA == 0.0)[0]
    # the V block sits after the m*r loading-direction block in the ambient layout
    free = free_local + m * r
    chan = SlackChannel(kind="box", bound=bound, free_idx=free, sign=1.0)
    problem = DepthProblem(influences=T, direction_space=basis, slack=chan)
    return solve_depth(problem, config)
