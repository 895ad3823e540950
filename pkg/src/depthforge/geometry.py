"""Tangent-space constructions on the unit sphere and the Stiefel manifold.

The depth machinery never optimizes on a curved manifold directly: every
constrained direction set is handed to the solver as an explicit orthonormal
basis of a linear subspace, so that minimizing over unit directions in the
subspace becomes minimizing over the unit sphere of R^k.  This module builds
those bases and evaluates first/second geodesic derivatives on the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-10
FD_STEP = 1e-5


def as_unit_vector(x, tol: float = 1e-10, name: str = "vector") -> np.ndarray:
    """Validate and return a 1-D unit vector as a float array."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"{name} is not unit length: ||.||_2 = {nrm!r}")
    return v


def as_stiefel(U, tol: float = 1e-10, name: str = "matrix") -> np.ndarray:
    """Validate a column-orthonormal m x r matrix (m >= r >= 1)."""
    A = np.asarray(U, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    m, r = A.shape
    if r < 1 or m < r:
        raise ValueError(f"{name} must be m x r with m >= r >= 1, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    gram = A.T @ A
    err = np.max(np.abs(gram - np.eye(r)))
    if err > tol:
        raise ValueError(f"{name} has non-orthonormal columns (max |U'U - I| = {err:.3e})")
    return A


@dataclass(frozen=True)
class TangentBasis:
    """Orthonormal basis (as columns) of a linear direction subspace.

    ``basis`` has shape (ambient_dim, k).  A k = 0 basis is legal and means
    the direction space is trivial.
    """

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2:
            raise ValueError(f"basis must be 2-D, got shape {B.shape}")
        d, k = B.shape
        if k > d:
            raise ValueError(f"subspace dimension {k} exceeds ambient dimension {d}")
        if k > 0:
            err = np.max(np.abs(B.T @ B - np.eye(k)))
            if err > ORTHO_TOL:
                raise ValueError(f"basis columns not orthonormal (max err {err:.3e})")
        object.__setattr__(self, "basis", B)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def embed(self, w: np.ndarray) -> np.ndarray:
        """Map subspace coordinates to ambient coordinates."""
        return self.basis @ np.asarray(w, dtype=float)

    def reduce(self, v: np.ndarray) -> np.ndarray:
        """Project ambient coordinates onto the subspace coordinates."""
        return self.basis.T @ np.asarray(v, dtype=float)


def identity_basis(d: int) -> TangentBasis:
    return TangentBasis(np.eye(d))


def block_diag_basis(blocks: list[np.ndarray]) -> TangentBasis:
    """Stack per-channel bases into one orthonormal basis of the product space.

    Each block is a (d_i, k_i) column-orthonormal matrix; the result embeds
    block i's columns at ambient offset sum(d_0..d_{i-1}).  The unit sphere in
    the stacked coordinates is exactly the product constraint
    ||v_1||^2 + ... + ||v_b||^2 = 1.
    """
    dims = [b.shape[0] for b in blocks]
    ks = [b.shape[1] for b in blocks]
    d, k = sum(dims), sum(ks)
    out = np.zeros((d, k))
    ro = co = 0
    for b, di, ki in zip(blocks, dims, ks):
        out[ro:ro + di, co:co + ki] = b
        ro += di
        co += ki
    return TangentBasis(out)


def sphere_tangent_project(mu, w) -> np.ndarray:
    """Project w onto the tangent space of the sphere at mu: w - <w, mu> mu."""
    mu = as_unit_vector(mu, tol=1e-8, name="mu")
    w = np.asarray(w, dtype=float)
    if w.shape != mu.shape:
        raise ValueError(f"dimension mismatch: mu has {mu.shape}, w has {w.shape}")
    return w - (w @ mu) * mu


def orthonormal_complement(U) -> np.ndarray:
    """Column-orthonormal m x (m-r) matrix W with U'W = 0.

    Computed from the full orthogonal factor of the SVD of U, with a
    deterministic sign convention (the first entry of each column that is
    larger than 1e-12 in magnitude is made positive) so complements are
    reproducible fixtures.  m = r yields a 0-column result.
    """
    A = as_stiefel(U)
    m, r = A.shape
    if m == r:
        return np.zeros((m, 0))
    full_left, _, _ = np.linalg.svd(A, full_matrices=True)
    W = full_left[:, r:].copy()
    for j in range(W.shape[1]):
        col = W[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            W[:, j] = -col
    return W


def sphere_tangent_basis(mu) -> TangentBasis:
    """Orthonormal basis of {u : u' mu = 0} for a unit vector mu."""
    mu = as_unit_vector(mu, tol=1e-8, name="mu")
    return TangentBasis(orthonormal_complement(mu[:, None] / np.linalg.norm(mu)))


def stiefel_tangent_basis(U) -> TangentBasis:
    """Orthonormal basis of the Stiefel tangent space at U, vectorized column-major.

    The tangent space {V : U'V + V'U = 0} has dimension mr - r(r+1)/2 and is
    spanned by U (skew generator)/sqrt(2) together with U_perp (elementary
    matrix); both families are orthonormal in the Frobenius inner product.
    """
    A = as_stiefel(U)
    m, r = A.shape
    k = m * r - r * (r + 1) // 2
    cols = np.zeros((m * r, k))
    idx = 0
    for i in range(r):
        for j in range(i + 1, r):
            gen = np.zeros((r, r))
            gen[i, j] = 1.0
            gen[j, i] = -1.0
            cols[:, idx] = (A @ gen).ravel(order="F") / np.sqrt(2.0)
            idx += 1
    perp = orthonormal_complement(A)
    for j in range(r):
        for i in range(m - r):
            mat = np.outer(perp[:, i], np.eye(r)[j])
            cols[:, idx] = mat.ravel(order="F")
            idx += 1
    return TangentBasis(cols)


@dataclass(frozen=True)
class WatsonLoss:
    """Per-sample Watson log-likelihood terms -kappa <mu, z_i>^2 on the sphere.

    Carries the analytic geodesic derivatives along gamma(t) = mu cos t + v sin t:
        g_i = -2 kappa <mu, z_i> <v, z_i>
        h_i = -2 kappa (<v, z_i>^2 - <mu, z_i>^2)
    """

    points: np.ndarray
    kappa: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return -self.kappa * (np.asarray(self.points) @ x) ** 2

    def geodesic_derivatives(self, mu: np.ndarray, v: np.ndarray):
        Z = np.asarray(self.points, dtype=float)
        c = Z @ mu
        s = Z @ v
        g = -2.0 * self.kappa * c * s
        h = -2.0 * self.kappa * (s ** 2 - c ** 2)
        return g, h


@dataclass(frozen=True)
class VmfLoss:
    """Per-sample von Mises-Fisher terms -kappa <mu, z_i> with analytic derivatives.

    Along the geodesic: g_i = -kappa <v, z_i>, h_i = kappa <mu, z_i>.
    """

    points: np.ndarray
    kappa: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return -self.kappa * (np.asarray(self.points) @ x)

    def geodesic_derivatives(self, mu: np.ndarray, v: np.ndarray):
        Z = np.asarray(self.points, dtype=float)
        g = -self.kappa * (Z @ v)
        h = self.kappa * (Z @ mu)
        return g, h


def sphere_geodesic_derivatives(mu, v, per_sample_loss):
    """First and second derivatives of per-sample losses along a sphere geodesic.

    ``per_sample_loss`` maps a point on the sphere to the n-vector of sample
    losses.  Losses exposing ``geodesic_derivatives`` (Watson, vMF) are
    evaluated analytically; anything else falls back to central finite
    differences with step 1e-5 along gamma(t) = mu cos t + v sin t.
    """
    mu = as_unit_vector(mu, tol=1e-8, name="mu")
    v = as_unit_vector(v, tol=1e-8, name="v")
    if abs(mu @ v) > 1e-8:
        raise ValueError(f"v is not tangent at mu: <mu, v> = {mu @ v!r}")
    if hasattr(per_sample_loss, "geodesic_derivatives"):
        g, h = per_sample_loss.geodesic_derivatives(mu, v)
        return np.asarray(g, dtype=float), np.asarray(h, dtype=float)

    def gamma(t):
        return mu * np.cos(t) + v * np.sin(t)

    t = FD_STEP
    f_plus = np.asarray(per_sample_loss(gamma(t)), dtype=float)
    f_zero = np.asarray(per_sample_loss(gamma(0.0)), dtype=float)
    f_minus = np.asarray(per_sample_loss(gamma(-t)), dtype=float)
    g = (f_plus - f_minus) / (2.0 * t)
    h = (f_plus - 2.0 * f_zero + f_minus) / (t * t)
    return g, h
