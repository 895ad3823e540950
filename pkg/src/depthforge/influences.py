"""Per-sample influence vectors for each depth family.

Every depth in this package is a halfspace depth of influence vectors: the
per-sample gradients (Euclidean or tangent-space) of a loss at a candidate
parameter.  Matrix-valued influences are vectorized column-major into a flat
ambient space; product direction constraints are realized as orthonormal
block bases so the solver only ever sees vectors and a unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    TangentBasis,
    as_stiefel,
    as_unit_vector,
    block_diag_basis,
    stiefel_tangent_basis,
)

TANGENCY_TOL = 1e-10


@dataclass(frozen=True)
class InfluenceSet:
    """n per-sample influence vectors in a flat ambient space of dimension d.

    ``offset`` is an optional shared d-vector added to every row when scoring
    (it houses the gamma/n correction of the thresholding depths).
    """

    rows: np.ndarray
    offset: np.ndarray | None = None

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if not np.all(np.isfinite(R)):
            raise ValueError("influence rows contain non-finite entries")
        if R.shape[1] < 1:
            raise ValueError("ambient dimension must be >= 1")
        object.__setattr__(self, "rows", R)
        if self.offset is not None:
            off = np.asarray(self.offset, dtype=float)
            if off.shape != (R.shape[1],):
                raise ValueError(
                    f"offset dimension {off.shape} does not match ambient dimension {R.shape[1]}"
                )
            if not np.all(np.isfinite(off)):
                raise ValueError("offset contains non-finite entries")
            object.__setattr__(self, "offset", off)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def effective_rows(self) -> np.ndarray:
        """Rows with the shared offset folded in."""
        if self.offset is None:
            return self.rows
        return self.rows + self.offset


def subspace_reparametrize(T: InfluenceSet, basis: TangentBasis) -> InfluenceSet:
    """Express influences in subspace coordinates: rows become basis' T_i.

    Minimizing the 0-1 count over unit directions in span(basis) equals
    minimizing over unit vectors of R^k applied to the reduced set, because
    <basis w, T_i> = <w, basis' T_i>.
    """
    if T.d != basis.ambient_dim:
        raise ValueError(
            f"ambient mismatch: influences have d={T.d}, basis has d={basis.ambient_dim}"
        )
    off = None if T.offset is None else basis.reduce(T.offset)
    return InfluenceSet(T.rows @ basis.basis, offset=off)


# ---------------------------------------------------------------------------
# Pointwise losses for GLM-type influences
# ---------------------------------------------------------------------------


class SquaredLoss:
    """l0(u; y) = (u - y)^2 / 2."""

    name = "squared"
    lipschitz = 1.0

    def value(self, u, y):
        return 0.5 * (np.asarray(u, float) - y) ** 2

    def derivative(self, u, y):
        return np.asarray(u, float) - y


class LogisticLoss:
    """l0(u; y) = log(1 + e^u) - y u, labels coded {0, 1}."""

    name = "logistic"
    lipschitz = 0.25

    def value(self, u, y):
        u = np.asarray(u, float)
        return np.logaddexp(0.0, u) - y * u

    def derivative(self, u, y):
        u = np.asarray(u, float)
        return 1.0 / (1.0 + np.exp(-u)) - y


class HuberLoss:
    """Huber loss on the residual u - y with default constant 1.345."""

    name = "huber"
    lipschitz = 1.0

    def __init__(self, delta: float = 1.345):
        if delta <= 0:
            raise ValueError("huber delta must be positive")
        self.delta = float(delta)

    def value(self, u, y):
        r = np.asarray(u, float) - y
        d = self.delta
        return np.where(np.abs(r) <= d, 0.5 * r ** 2, d * np.abs(r) - 0.5 * d ** 2)

    def derivative(self, u, y):
        r = np.asarray(u, float) - y
        return np.clip(r, -self.delta, self.delta)


LOSSES = {
    "squared": SquaredLoss,
    "logistic": LogisticLoss,
    "huber": HuberLoss,
}


def get_loss(loss):
    """Resolve a loss by name or pass an already-constructed loss through."""
    if isinstance(loss, str):
        try:
            return LOSSES[loss]()
        except KeyError:
            raise ValueError(f"unknown loss {loss!r}; choose from {sorted(LOSSES)}") from None
    if hasattr(loss, "derivative") and hasattr(loss, "lipschitz"):
        return loss
    raise ValueError(f"not a loss: {loss!r}")


# ---------------------------------------------------------------------------
# Influence constructors
# ---------------------------------------------------------------------------


def _as_matrix(Z, name):
    A = np.atleast_2d(np.asarray(Z, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def location_influence(Z, mu0) -> InfluenceSet:
    """Classical location influences z_i - mu0."""
    Z = _as_matrix(Z, "Z")
    mu0 = np.asarray(mu0, dtype=float).ravel()
    if Z.shape[1] != mu0.size:
        raise ValueError(f"dimension mismatch: data dim {Z.shape[1]}, mu0 dim {mu0.size}")
    return InfluenceSet(Z - mu0)


def regression_influence(X, y, beta0) -> InfluenceSet:
    """Squared-loss regression influences x_i (x_i' beta0 - y_i)."""
    X = _as_matrix(X, "X")
    y = np.asarray(y, dtype=float).ravel()
    beta0 = np.asarray(beta0, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"shape mismatch: X has {X.shape[0]} rows, y has {y.size}")
    if X.shape[1] != beta0.size:
        raise ValueError(f"shape mismatch: X has {X.shape[1]} columns, beta0 has {beta0.size}")
    resid = X @ beta0 - y
    return InfluenceSet(X * resid[:, None])


def glm_influence(X, y, beta0, loss="squared") -> InfluenceSet:
    """Gradient influences x_i l0'(x_i' beta0; y_i) for a pointwise loss."""
    X = _as_matrix(X, "X")
    y = np.asarray(y, dtype=float).ravel()
    beta0 = np.asarray(beta0, dtype=float).ravel()
    if X.shape[0] != y.size or X.shape[1] != beta0.size:
        raise ValueError("shape mismatch between X, y, beta0")
    loss = get_loss(loss)
    deriv = loss.derivative(X @ beta0, y)
    if not np.all(np.isfinite(deriv)):
        raise ValueError("loss derivative is non-finite at the fitted values")
    return InfluenceSet(X * np.asarray(deriv, float)[:, None])


def _unit_rows(Z, tol=1e-8):
    Z = _as_matrix(Z, "Z")
    nrm = np.linalg.norm(Z, axis=1)
    if np.any(np.abs(nrm - 1.0) > tol):
        bad = int(np.argmax(np.abs(nrm - 1.0)))
        raise ValueError(f"row {bad} of Z is not unit length (||z|| = {nrm[bad]!r})")
    return Z


def watson_influence(Z, mu0) -> InfluenceSet:
    """Watson influences <z_i, mu0>(z_i - <z_i, mu0> mu0), tangent at mu0."""
    Z = _unit_rows(Z)
    mu0 = as_unit_vector(mu0, tol=1e-8, name="mu0")
    c = Z @ mu0
    rows = c[:, None] * (Z - np.outer(c, mu0))
    return InfluenceSet(rows)


def vmf_influence(Z, mu0) -> InfluenceSet:
    """vMF influences: the raw points z_i (the direction space carries tangency)."""
    Z = _unit_rows(Z)
    as_unit_vector(mu0, tol=1e-8, name="mu0")
    return InfluenceSet(Z)


def pc_influence(Z, mu0, U0) -> tuple[InfluenceSet, TangentBasis]:
    """Principal-component depth influences with their product direction space.

    Per sample, the influence concatenates the intercept-channel gradient
    (I - U0 U0')(mu0 - z_i) with the vectorized loading-channel gradient
    -(mu0 - z_i)(mu0 - z_i)' U0.  Pass ``mu0=None`` to drop the intercept
    channel entirely (the no-intercept model); a zero vector keeps the channel
    with a zero center.
    """
    Z = _as_matrix(Z, "Z")
    U0 = as_stiefel(U0, name="U0")
    m, r = U0.shape
    if Z.shape[1] != m:
        raise ValueError(f"data dim {Z.shape[1]} does not match U0 rows {m}")
    n = Z.shape[0]
    if mu0 is None:
        diff = -Z
    else:
        mu0 = np.asarray(mu0, dtype=float).ravel()
        if mu0.size != m:
            raise ValueError(f"mu0 dim {mu0.size} does not match data dim {m}")
        diff = mu0 - Z
    # matrix part: -(mu0 - z_i)(mu0 - z_i)' U0, an m x r matrix per sample
    proj = diff @ U0                                # (n, r)
    mat = -(proj[:, :, None] * diff[:, None, :])    # (n, r, m): [i, j, l] = -d_l (d'U0)_j
    mat_rows = mat.reshape(n, r * m)                # C reshape = column-major vec of the m x r matrix
    tangent = stiefel_tangent_basis(U0)
    if mu0 is None:
        return InfluenceSet(mat_rows), tangent
    vec_rows = diff - (diff @ U0) @ U0.T
    rows = np.concatenate([vec_rows, mat_rows], axis=1)
    basis = block_diag_basis([np.eye(m), tangent.basis])
    return InfluenceSet(rows), basis


def oc_influence(Z, mubar0, Ubar0) -> tuple[InfluenceSet, TangentBasis]:
    """Orthogonal-complement depth influences with their direction space.

    Per sample: the center-channel gradient (mubar0 - Ubar0' z_i) concatenated
    with vec(z_i z_i' Ubar0 - z_i mubar0').  ``mubar0=None`` drops the center
    channel (no-intercept model).
    """
    Z = _as_matrix(Z, "Z")
    Ubar0 = as_stiefel(Ubar0, name="Ubar0")
    m, rbar = Ubar0.shape
    if Z.shape[1] != m:
        raise ValueError(f"data dim {Z.shape[1]} does not match Ubar0 rows {m}")
    n = Z.shape[0]
    proj = Z @ Ubar0                                # (n, rbar)
    mat = proj[:, :, None] * Z[:, None, :]          # (n, rbar, m): [i, j, l] = (z z' U)_{lj}
    if mubar0 is not None:
        mubar0 = np.asarray(mubar0, dtype=float).ravel()
        if mubar0.size != rbar:
            raise ValueError(f"mubar0 dim {mubar0.size} does not match rank {rbar}")
        mat = mat - mubar0[None, :, None] * Z[:, None, :]
    mat_rows = mat.reshape(n, rbar * m)
    tangent = stiefel_tangent_basis(Ubar0)
    if mubar0 is None:
        return InfluenceSet(mat_rows), tangent
    vec_rows = mubar0 - proj
    rows = np.concatenate([vec_rows, mat_rows], axis=1)
    basis = block_diag_basis([np.eye(rbar), tangent.basis])
    return InfluenceSet(rows), basis


def rrr_influence(X, Y, B0) -> InfluenceSet:
    """Reduced-rank regression influences vec(x_i (x_i' B0 - y_i')), column-major."""
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    B0 = np.atleast_2d(np.asarray(B0, dtype=float))
    n, p = X.shape
    if Y.shape[0] != n:
        raise ValueError(f"X has {n} rows but Y has {Y.shape[0]}")
    m = Y.shape[1]
    if B0.shape != (p, m):
        raise ValueError(f"B0 has shape {B0.shape}, expected ({p}, {m})")
    R = X @ B0 - Y                                  # (n, m)
    rows = (R[:, :, None] * X[:, None, :]).reshape(n, m * p)
    return InfluenceSet(rows)


def sparse_rrr_influence(X, Y, A0, U0) -> tuple[InfluenceSet, TangentBasis]:
    """Influences for the sparse reduced-rank model Y ~ X A U' with their space.

    Per sample the row concatenates the loading-direction part
    vec(-y_i x_i' A0) (m x r, paired with the Stiefel tangent space at U0)
    and the sparse-factor part vec(x_i (x_i' A0 - y_i' U0)) (p x r, free).
    The slack channel on the second block is attached by the depth assembly.
    """
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    U0 = as_stiefel(U0, name="U0")
    n, p = X.shape
    m, r = U0.shape
    if Y.shape != (n, m):
        raise ValueError(f"Y has shape {Y.shape}, expected ({n}, {m})")
    if A0.shape != (p, r):
        raise ValueError(f"A0 has shape {A0.shape}, expected ({p}, {r})")
    XA = X @ A0                                     # (n, r)
    # W block: -(y_i)(x_i' A0), an m x r matrix per sample, vec column-major
    w_rows = -(XA[:, :, None] * Y[:, None, :]).reshape(n, r * m)
    # V block: x_i (x_i' A0 - y_i' U0), a p x r matrix per sample
    fitted = XA - Y @ U0                            # (n, r)
    v_rows = (fitted[:, :, None] * X[:, None, :]).reshape(n, r * p)
    rows = np.concatenate([w_rows, v_rows], axis=1)
    basis = block_diag_basis([stiefel_tangent_basis(U0).basis, np.eye(p * r)])
    return InfluenceSet(rows), basis
