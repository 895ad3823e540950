"""Reference estimators: closed-form RRR, iterative thresholding fits, deepest search.

The iterative fits are the fixed-point algorithms whose stationary points the
slacked depths characterize; every converged fit is certified against its
family's fixed-point residual at 1e-8.  ``deepest_search`` ranks sampled
candidates by a caller-supplied depth functional and returns the deepest one.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .influences import get_loss
from .thresholding import (
    ThresholdRule,
    check_rrr_fixed_point,
    matrix_quantile_threshold,
    penalty_value,
    quantile_threshold,
    threshold,
)

FIXED_POINT_TOL = 1e-8


@dataclass
class FitResult:
    """A fitted parameter with convergence and fixed-point certification."""

    parameter: np.ndarray
    iterations: int
    converged: bool
    objective: float
    fixed_point_residual: float
    diagnostics: dict = field(default_factory=dict)


def _spectral_norm(X) -> float:
    return float(np.linalg.norm(X, 2))


def fit_rrr(X, Y, r: int) -> FitResult:
    """Closed-form reduced-rank regression estimator of rank r.

    B_hat = (X'X)^+ X'Y V_r V_r' with V_r the top-r eigenvectors of
    Y'X (X'X)^+ X'Y; a near-degenerate eigengap at position r (relative gap
    below 1e-8) is flagged since the estimator is then non-unique.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, p = X.shape
    m = Y.shape[1]
    if not 1 <= r <= min(p, m):
        raise ValueError(f"rank r must be in [1, {min(p, m)}], got {r}")
    gram_inv = np.linalg.pinv(X.T @ X)
    ls = gram_inv @ (X.T @ Y)
    C = Y.T @ X @ gram_inv @ X.T @ Y
    evals, evecs = np.linalg.eigh(C)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    V_r = evecs[:, :r]
    B = ls @ V_r @ V_r.T
    degenerate = False
    if r < m:
        top = max(float(evals[0]), 1e-300)
        degenerate = (float(evals[r - 1]) - float(evals[r])) / top < 1e-8
    rho = 1.01 * _spectral_norm(X) ** 2
    residual = check_rrr_fixed_point(B, X, Y, r, rho)
    objective = 0.5 * float(np.linalg.norm(Y - X @ B) ** 2)
    return FitResult(
        parameter=B,
        iterations=1,
        converged=residual < FIXED_POINT_TOL,
        objective=objective,
        fixed_point_residual=residual,
        diagnostics={"degenerate_eigengap": degenerate, "rho": rho},
    )


def fit_tisp(X, y, rule: ThresholdRule, loss="squared", rho: float | None = None,
             max_iters: int = 10_000, tol: float = 1e-10) -> FitResult:
    """Iterative thresholding fit: fixed points of beta = Theta(beta - X' grad; lambda).

    The surrogate theory requires rho >= L ||X||_2^2; the iteration is run on
    the equivalently rescaled design X/sqrt(rho) (spectral norm <= 1/sqrt(L)),
    where the plain thresholding map with unchanged lambda is exactly the
    surrogate minimizer, and the fit is mapped back to original coordinates
    on output.  The penalized objective of the scaled problem is tracked and
    must not increase; an increase is reported as divergence.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    loss_obj = get_loss(loss)
    L = loss_obj.lipschitz
    min_rho = L * _spectral_norm(X) ** 2
    if rho is None:
        rho = 1.01 * min_rho
    elif rho < min_rho * (1 - 1e-12):
        raise ValueError(f"rho = {rho} is below L ||X||_2^2 = {min_rho}")
    scale = 1.0 / np.sqrt(rho)
    Xs = scale * X
    p = X.shape[1]
    beta = np.zeros(p)

    def objective(b):
        return float(np.sum(loss_obj.value(Xs @ b, y)) + np.sum(penalty_value(rule, b)))

    obj = objective(beta)
    converged = False
    diverged = False
    it = 0
    for it in range(1, max_iters + 1):
        grad = Xs.T @ loss_obj.derivative(Xs @ beta, y)
        beta_new = threshold(rule, beta - grad)
        obj_new = objective(beta_new)
        if obj_new > obj + 1e-9 * (1.0 + abs(obj)):
            diverged = True
            break
        moved = np.linalg.norm(beta_new - beta)
        beta, obj = beta_new, obj_new
        if moved <= tol * (1.0 + np.linalg.norm(beta)):
            converged = True
            break
    grad = Xs.T @ loss_obj.derivative(Xs @ beta, y)
    residual = float(np.linalg.norm(beta - threshold(rule, beta - grad)))
    converged = converged and residual < FIXED_POINT_TOL and not diverged
    return FitResult(
        parameter=scale * beta,
        iterations=it,
        converged=converged,
        objective=obj,
        fixed_point_residual=residual,
        diagnostics={
            "rho": rho,
            "design_scale": scale,
            "scaled_parameter": beta,
            "diverged": diverged,
        },
    )


def fit_piq(X, y, q: int, loss="squared", rho: float | None = None,
            max_iters: int = 10_000, tol: float = 1e-10) -> FitResult:
    """Iterative quantile-thresholding fit under the cardinality constraint ||beta||_0 <= q.

    Iterates beta <- Theta#(beta - (1/rho) X' grad(X beta); q) with
    rho >= L ||X||_2^2.  Short cycles (length <= 4) are detected as
    oscillation: the best-objective iterate is returned unconverged.  Ties at
    the q-th magnitude are resolved deterministically (smaller index kept)
    and flagged.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    p = X.shape[1]
    if not 1 <= q <= p:
        raise ValueError(f"q must be in [1, {p}], got {q}")
    loss_obj = get_loss(loss)
    min_rho = loss_obj.lipschitz * _spectral_norm(X) ** 2
    if rho is None:
        rho = 1.01 * min_rho
    elif rho < min_rho * (1 - 1e-12):
        raise ValueError(f"rho = {rho} is below L ||X||_2^2 = {min_rho}")

    def objective(b):
        return float(np.sum(loss_obj.value(X @ b, y)))

    def step(b):
        grad = X.T @ loss_obj.derivative(X @ b, y)
        return quantile_threshold(b - grad / rho, q)

    beta = np.zeros(p)
    history = [beta]
    best = (objective(beta), beta)
    converged = False
    oscillating = False
    it = 0
    for it in range(1, max_iters + 1):
        beta_new = step(beta)
        obj_new = objective(beta_new)
        if obj_new < best[0]:
            best = (obj_new, beta_new)
        moved = np.linalg.norm(beta_new - beta)
        if moved <= tol * (1.0 + np.linalg.norm(beta)):
            beta = beta_new
            converged = True
            break
        for lag in range(2, min(5, len(history) + 1)):
            if np.linalg.norm(beta_new - history[-lag]) <= 1e-12 * (1.0 + np.linalg.norm(beta_new)):
                oscillating = True
                break
        if oscillating:
            beta = best[1]
            break
        history.append(beta_new)
        if len(history) > 6:
            history.pop(0)
        beta = beta_new
    grad = X.T @ loss_obj.derivative(X @ beta, y)
    arg = beta - grad / rho
    residual = float(np.linalg.norm(beta - quantile_threshold(arg, q)))
    mags = np.sort(np.abs(arg))[::-1]
    tied = bool(q < p and abs(mags[q - 1] - mags[q]) <= 1e-12 * (1.0 + mags[0]))
    converged = converged and residual < FIXED_POINT_TOL
    return FitResult(
        parameter=beta,
        iterations=it,
        converged=converged,
        objective=objective(beta),
        fixed_point_residual=residual,
        diagnostics={"rho": rho, "oscillating": oscillating, "tied": tied},
    )


# ---------------------------------------------------------------------------
# Deepest-estimate search
# ---------------------------------------------------------------------------


def _max_workers() -> int:
    env = os.environ.get("DEPTHFORGE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def deepest_search(depth_fn, sampler, budget: int, seed: int = 0):
    """Evaluate a depth functional at sampled candidates and return the deepest.

    ``sampler(index, rng)`` produces candidate index 0, 1, ...; returning
    None (or raising ValueError) marks the candidate infeasible, which is
    skipped but still counts against the budget.  Candidates are drawn
    serially from one seeded generator, so a larger budget extends the same
    stream and the argmax is monotone in the budget.  Depth evaluations run
    on up to DEPTHFORGE_THREADS workers; ties keep the earliest candidate.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    candidates = []
    skipped = 0
    for i in range(budget):
        try:
            cand = sampler(i, rng)
        except ValueError:
            cand = None
        if cand is None:
            skipped += 1
            continue
        candidates.append((i, np.asarray(cand, dtype=float)))
    if not candidates:
        raise ValueError("sampler produced no feasible candidates")
    workers = min(_max_workers(), len(candidates))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: depth_fn(t[1]), candidates))
    else:
        results = [depth_fn(cand) for _, cand in candidates]
    best_pos = 0
    for pos in range(1, len(results)):
        if results[pos].normalized > results[best_pos].normalized:
            best_pos = pos
    best_param = candidates[best_pos][1]
    best_result = results[best_pos]
    best_result.diagnostics = dict(best_result.diagnostics)
    best_result.diagnostics.update(
        {"candidates_evaluated": len(candidates), "candidates_skipped": skipped,
         "best_index": candidates[best_pos][0],
         "trace_normalized": [res.normalized for res in results]}
    )
    return best_param, best_result


def make_rrr_sampler(X, Y, r: int, base: np.ndarray | None = None,
                     noise_scales=(0.01, 0.1, 0.5)):
    """Default candidate stream for the deepest rank-r coefficient search.

    Index 0 is the base fit; afterwards each block of ten cycles three noise
    perturbations per scale (relative to the base Frobenius norm, projected
    back to rank r) followed by one row-resampled refit.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if base is None:
        base = fit_rrr(X, Y, r).parameter
    base = np.asarray(base, dtype=float)
    n = X.shape[0]
    sigma0 = float(np.linalg.norm(base)) / np.sqrt(base.size)

    def sampler(i: int, rng: np.random.Generator):
        if i == 0:
            return base
        slot = (i - 1) % 10
        if slot == 9:
            idx = rng.integers(0, n, n)
            refit = fit_rrr(X[idx], Y[idx], r)
            return refit.parameter
        scale = noise_scales[slot // 3]
        cand = base + scale * sigma0 * rng.standard_normal(base.shape)
        return matrix_quantile_threshold(cand, r)

    return sampler


def make_sparse_sampler(X, y, q: int, loss="squared", base: np.ndarray | None = None,
                        noise_scales=(0.01, 0.1, 0.5)):
    """Default candidate stream for the deepest q-sparse coefficient search.

    Same layout as the rank-r sampler, with candidates projected to exact
    support size q by quantile thresholding and refits by the iterative
    quantile-thresholding algorithm on resampled rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if base is None:
        base = fit_piq(X, y, q, loss=loss).parameter
    base = np.asarray(base, dtype=float)
    n = X.shape[0]
    sigma0 = float(np.linalg.norm(base)) / np.sqrt(base.size)

    def sampler(i: int, rng: np.random.Generator):
        if i == 0:
            return base
        slot = (i - 1) % 10
        if slot == 9:
            idx = rng.integers(0, n, n)
            refit = fit_piq(X[idx], y[idx], q, loss=loss)
            return refit.parameter
        scale = noise_scales[slot // 3]
        cand = base + scale * sigma0 * rng.standard_normal(base.shape)
        cand = quantile_threshold(cand, q)
        if np.count_nonzero(cand) != q:
            return None
        return cand

    return sampler
