"""Thresholding rules, their generalized inverses, and fixed-point residuals.

A thresholding rule Theta(.; lambda) is an odd, nondecreasing shrinkage map
with |Theta(t)| <= |t|.  Each rule induces a sparsity penalty, a generalized
inverse Theta^{-1}(u) = sup{t : Theta(t) <= u}, and the gamma correction that
enters the thresholding depths as a fixed offset.  Quantile thresholding keeps
the q largest-magnitude entries; its singular-value version is rank truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("soft", "hard", "scad", "mcp")
_AUX_DEFAULTS = {"scad": 3.7, "mcp": 3.0}


@dataclass(frozen=True)
class ThresholdRule:
    """One of soft / hard / SCAD / MCP with threshold ``lam`` and rule parameter.

    ``aux`` is the SCAD a (default 3.7, must exceed 2) or the MCP gamma
    (default 3.0, must exceed 1); it is ignored for soft and hard.
    """

    kind: str
    lam: float
    aux: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}; choose from {KINDS}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        aux = self.aux
        if aux is None:
            aux = _AUX_DEFAULTS.get(self.kind)
        if self.kind == "scad" and (aux is None or aux <= 2):
            raise ValueError(f"scad parameter a must be > 2, got {aux!r}")
        if self.kind == "mcp" and (aux is None or aux <= 1):
            raise ValueError(f"mcp parameter gamma must be > 1, got {aux!r}")
        object.__setattr__(self, "aux", aux)
        object.__setattr__(self, "lam", float(self.lam))


def threshold(rule: ThresholdRule, t):
    """Apply Theta(t; lambda) elementwise.  Odd in t, |Theta(t)| <= |t|."""
    t = np.asarray(t, dtype=float)
    lam = rule.lam
    a = np.abs(t)
    s = np.sign(t)
    if rule.kind == "soft":
        out = s * np.maximum(a - lam, 0.0)
    elif rule.kind == "hard":
        out = np.where(a > lam, t, 0.0)
    elif rule.kind == "scad":
        aa = rule.aux
        soft = s * np.maximum(a - lam, 0.0)
        mid = ((aa - 1.0) * t - s * aa * lam) / (aa - 2.0)
        out = np.where(a <= 2.0 * lam, soft, np.where(a <= aa * lam, mid, t))
    else:  # mcp
        g = rule.aux
        inner = s * np.maximum(a - lam, 0.0) * g / (g - 1.0)
        out = np.where(a <= g * lam, inner, t)
    return out if out.ndim else float(out)


def threshold_inverse(rule: ThresholdRule, u):
    """Generalized inverse Theta^{-1}(u) = sup{t : Theta(t) <= u}, odd in u.

    Analytic per rule; monotone nondecreasing on u >= 0.  At u = 0 the sup is
    lambda for every rule here (the flat region [0, lambda] maps to 0).
    """
    u = np.asarray(u, dtype=float)
    lam = rule.lam
    au = np.abs(u)
    s = np.where(u < 0, -1.0, 1.0)  # odd extension; u = 0 handled by the formulas
    if rule.kind == "soft":
        out = s * (au + lam)
    elif rule.kind == "hard":
        out = s * np.maximum(au, lam)
    elif rule.kind == "scad":
        aa = rule.aux
        out = s * np.where(
            au <= lam,
            np.where(au == 0.0, lam, au + lam),
            np.where(au <= aa * lam, (au * (aa - 2.0) + aa * lam) / (aa - 1.0), au),
        )
    else:  # mcp
        g = rule.aux
        out = s * np.where(
            au == 0.0,
            lam,
            np.where(au < g * lam, au * (g - 1.0) / g + lam, au),
        )
    return out if out.ndim else float(out)


def threshold_inverse_bisect(rule: ThresholdRule, u: float, hi: float | None = None) -> float:
    """Bisection fallback for the sup definition, validated against the grid sup.

    Exploits monotonicity of Theta: sup{t : Theta(t) <= u} lies where Theta
    first exceeds u.  Used in tests to cross-check the analytic forms.
    """
    if u < 0:
        return -threshold_inverse_bisect(rule, -u, hi)
    if hi is None:
        hi = 10.0 * rule.lam + 10.0 * max(u, 1.0) + 10.0
    lo = 0.0
    if threshold(rule, hi) <= u:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if threshold(rule, mid) <= u:
            lo = mid
        else:
            hi = mid
    return lo


def penalty_value(rule: ThresholdRule, t):
    """Closed-form penalty induced by the rule (elementwise).

    soft: lambda |t|; hard: the l0 form lambda^2/2 1{t != 0}; SCAD and MCP by
    their standard piecewise expressions.  Used for objective tracking in the
    iterative fits and as the 1-D prox oracle target in tests.
    """
    t = np.asarray(t, dtype=float)
    lam = rule.lam
    a = np.abs(t)
    if rule.kind == "soft":
        out = lam * a
    elif rule.kind == "hard":
        out = np.where(a > 0, 0.5 * lam ** 2, 0.0)
    elif rule.kind == "scad":
        aa = rule.aux
        mid = (2.0 * aa * lam * a - a ** 2 - lam ** 2) / (2.0 * (aa - 1.0))
        out = np.where(a <= lam, lam * a, np.where(a <= aa * lam, mid, 0.5 * lam ** 2 * (aa + 1.0)))
    else:  # mcp
        g = rule.aux
        out = np.where(a <= g * lam, lam * a - a ** 2 / (2.0 * g), 0.5 * g * lam ** 2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GammaVector:
    """The support-restricted correction gamma(beta), zero off the support."""

    values: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        sup = np.asarray(self.support, dtype=int)
        off = np.ones(v.size, dtype=bool)
        off[sup] = False
        if np.any(v[off] != 0.0):
            raise ValueError("gamma values must be zero off the support")
        if not np.all(np.isfinite(v)):
            raise ValueError("gamma values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support", sup)


def gamma_vector(rule: ThresholdRule, beta0) -> GammaVector:
    """gamma_j = Theta^{-1}(|beta_j|) sgn(beta_j) - beta_j on the support, else 0.

    The hard rule returns the zero vector (its inverse is the identity above
    the threshold, where bona fide hard-thresholded coefficients live); the
    soft rule simplifies to lambda sgn(beta_j), computed directly so it is
    exact in floating point.
    """
    beta0 = np.asarray(beta0, dtype=float).ravel()
    support = np.nonzero(beta0 != 0.0)[0]
    values = np.zeros_like(beta0)
    if rule.kind == "hard" or not support.size:
        return GammaVector(values, support)
    b = beta0[support]
    if rule.kind == "soft":
        values[support] = rule.lam * np.sign(b)
    else:
        values[support] = threshold_inverse(rule, np.abs(b)) * np.sign(b) - b
    return GammaVector(values, support)


def quantile_threshold(alpha, q: int):
    """Keep the q largest-magnitude entries of alpha and zero the rest.

    Ties at the q-th position are broken by keeping the smaller index.
    """
    alpha = np.asarray(alpha, dtype=float).ravel()
    p = alpha.size
    if not 0 <= q <= p:
        raise ValueError(f"q must be in [0, {p}], got {q}")
    if q == p:
        return alpha.copy()
    out = np.zeros_like(alpha)
    if q == 0:
        return out
    order = np.argsort(-np.abs(alpha), kind="stable")
    keep = order[:q]
    out[keep] = alpha[keep]
    return out


def matrix_quantile_threshold(B, r: int):
    """Apply quantile thresholding to the singular values: best rank-<=r truncation."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if not np.all(np.isfinite(B)):
        raise ValueError("matrix contains non-finite entries")
    p, m = B.shape
    if not 1 <= r <= min(p, m):
        raise ValueError(f"rank r must be in [1, {min(p, m)}], got {r}")
    U, sv, Vt = np.linalg.svd(B, full_matrices=False)
    kept = quantile_threshold(sv, r)
    return (U * kept) @ Vt


def discontinuity_gap(rule: ThresholdRule, args) -> float:
    """Distance of the arguments to the rule's nearest discontinuity (inf if none).

    Only the hard rule is discontinuous (at |t| = lambda); the fixed-point
    residual is unreliable when the thresholding argument sits within ~1e-8
    of the jump.
    """
    if rule.kind != "hard" or rule.lam == 0.0:
        return np.inf
    args = np.asarray(args, dtype=float)
    return float(np.min(np.abs(np.abs(args) - rule.lam)))


def check_theta_fixed_point(beta, X, y, loss, rule: ThresholdRule) -> float:
    """Residual ||beta - Theta(beta - X' grad(X beta); lambda)||_2.

    The displayed thresholding equation presumes the design is scaled so that
    ||X||_2 <= 1/sqrt(L); that scaling is the caller's responsibility.
    """
    from .influences import get_loss

    beta = np.asarray(beta, dtype=float).ravel()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    loss = get_loss(loss)
    grad = X.T @ loss.derivative(X @ beta, y)
    return float(np.linalg.norm(beta - threshold(rule, beta - grad)))


def check_rrr_fixed_point(B, X, Y, r: int, rho: float) -> float:
    """Residual ||B - Theta^{sigma#}(B - (1/rho) X'(XB - Y); r)||_F for rho > ||X||_2^2."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if rho <= 0:
        raise ValueError("rho must be positive")
    step = B - (X.T @ (X @ B - Y)) / rho
    return float(np.linalg.norm(B - matrix_quantile_threshold(step, r)))
