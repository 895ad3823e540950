"""Generic 0-1 depth minimization over unit directions with optional slack.

The solver minimizes sum_i 1_{>=0}(<v, T_i + offset> + shift(v, s)) over unit
directions v in a linear subspace, jointly with a slack variable s living in a
box or a spectral-norm ball.  Three facts organize the implementation:

* the direction constraint is always reduced to the unit sphere of R^k by an
  orthonormal basis, so one optimizer serves every depth family;
* for a fixed direction, the slack enters every sample through one scalar
  shift c = shift(v, s) ranging over a closed interval, so the 0-1 slack step
  is exact (the count is nondecreasing in c: take the lower endpoint);
* in reduced dimension <= 2 without active slack the minimum is computed
  exactly by an angular sweep over event directions; anything else is a
  multi-start smoothed search whose answer is re-scored under the 0-1 count
  and certified as an upper bound only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import TangentBasis
from .influences import InfluenceSet

DEFAULT_ZERO_TOL = 1e-12
SPAN_TOL = 1e-8


# ---------------------------------------------------------------------------
# Problem containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlackChannel:
    """Description of a slack term entering the count as sign * <v, embed(s)> / n.

    box: s is an ambient vector, zero on the equality set, with the free
    coordinates listed in ``free_idx`` and bounded by ``bound`` in magnitude
    (or confined to [0, bound] when ``one_sided``; bound may be inf).
    spectral: s is a matrix L with ||L||_2 <= bound, embedded structurally as
    left @ L @ right' into directions reshaped to ``mat_shape`` column-major.
    """

    kind: str
    bound: float
    free_idx: np.ndarray | None = None
    sign: float = 1.0
    one_sided: bool = False
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    mat_shape: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in ("box", "spectral"):
            raise ValueError(f"unknown slack kind {self.kind!r}")
        if self.bound < 0:
            raise ValueError("slack bound must be >= 0")
        if self.kind == "box":
            idx = np.asarray([] if self.free_idx is None else self.free_idx, dtype=int)
            object.__setattr__(self, "free_idx", idx)
        else:
            if self.left is None or self.right is None or self.mat_shape is None:
                raise ValueError("spectral channel needs left, right, and mat_shape")
            if not np.isfinite(self.bound):
                raise ValueError("spectral bound must be finite")

    @property
    def is_inert(self) -> bool:
        """True when the channel cannot move the count at any direction."""
        if self.bound == 0.0:
            return True
        if self.kind == "box":
            return self.free_idx.size == 0
        return self.left.shape[1] == 0 or self.right.shape[1] == 0

    # -- scalar-shift reduction ------------------------------------------------

    def _coeffs(self, v: np.ndarray, n: int) -> np.ndarray:
        """Per-free-coordinate coefficients u with shift = <u, s_free>."""
        return self.sign * np.asarray(v, float)[self.free_idx] / n

    def _direction_block(self, v: np.ndarray, n: int) -> np.ndarray:
        p, m = self.mat_shape
        M = np.asarray(v, float).reshape((p, m), order="F")
        return self.left.T @ M @ self.right

    def shift_of(self, v: np.ndarray, n: int, s) -> float:
        """Shift produced by a given slack value at direction v."""
        if self.kind == "box":
            s = np.asarray(s, float).ravel()
            return float(self._coeffs(v, n) @ s[self.free_idx])
        L = np.atleast_2d(np.asarray(s, float))
        M = self._direction_block(v, n)
        return float(self.sign * np.tensordot(M, L, axes=2) / n)

    def check_feasible(self, s, tol_box: float = 1e-12, tol_spec: float = 1e-10) -> None:
        if self.kind == "box":
            s = np.asarray(s, float).ravel()
            mask = np.ones(s.size, dtype=bool)
            mask[self.free_idx] = False
            if np.any(np.abs(s[mask]) > tol_box):
                raise ValueError("slack violates the equality mask")
            free = s[self.free_idx]
            if self.one_sided and np.any(free < -tol_box):
                raise ValueError("one-sided slack must be nonnegative")
            if np.isfinite(self.bound) and np.any(np.abs(free) > self.bound + tol_box):
                raise ValueError("slack exceeds the box bound")
        else:
            L = np.atleast_2d(np.asarray(s, float))
            if L.size and np.linalg.norm(L, 2) > self.bound + tol_spec:
                raise ValueError("slack exceeds the spectral bound")

    def best_shift(self, v: np.ndarray, n: int, args: np.ndarray):
        """Exact count-minimizing shift for fixed v, with a feasible realizer.

        The count #{a_i + c >= 0} is nondecreasing in c, so the optimum sits at
        the interval's lower end.  Unbounded one-sided channels realize a
        finite slack far enough past the extreme breakpoint -max(a_i).
        """
        if self.kind == "box":
            u = self._coeffs(v, n)
            s = np.zeros(np.asarray(v).size)
            if self.is_inert or u.size == 0:
                return 0.0, s
            if not self.one_sided:
                s_free = -np.sign(u) * self.bound
                s[self.free_idx] = s_free
                return float(u @ s_free), s
            neg = u < 0.0
            if np.isfinite(self.bound):
                s_free = np.where(neg, self.bound, 0.0)
                s[self.free_idx] = s_free
                return float(u @ s_free), s
            if not np.any(neg):
                return 0.0, s
            target = min(-float(np.max(args)) - 1.0, 0.0)
            if target == 0.0:
                return 0.0, s
            j = int(np.argmin(u))
            s_val = np.zeros(u.size)
            s_val[j] = target / u[j]
            s[self.free_idx] = s_val
            return target, s
        # spectral
        M = self._direction_block(v, n)
        if M.size == 0 or self.bound == 0.0:
            return 0.0, np.zeros(M.shape)
        A, sv, Bt = np.linalg.svd(M, full_matrices=False)
        L = -self.sign * self.bound * (A @ Bt)
        return float(-self.bound * np.sum(sv) / n), L

    def batch_shifts(self, V: np.ndarray, n: int, work_bound: float | None = None) -> np.ndarray:
        """Lower-endpoint shifts for a stack of ambient directions (R, d).

        ``work_bound`` replaces an infinite bound with a finite surrogate for
        smooth refinement; without it, unbounded channels yield -inf entries.
        """
        if self.kind == "box":
            U = self.sign * V[:, self.free_idx] / n
            if self.is_inert or U.shape[1] == 0:
                return np.zeros(V.shape[0])
            bound = self.bound
            if not np.isfinite(bound) and work_bound is not None:
                bound = work_bound
            if not self.one_sided:
                return -bound * np.sum(np.abs(U), axis=1)
            neg = np.minimum(U, 0.0)
            if np.isfinite(bound):
                return bound * np.sum(neg, axis=1)
            out = np.zeros(V.shape[0])
            out[np.any(U < 0.0, axis=1)] = -np.inf
            return out
        p, m = self.mat_shape
        mats = V.reshape(V.shape[0], m, p).transpose(0, 2, 1)
        blocks = self.left.T[None] @ mats @ self.right[None]
        if blocks.shape[1] == 0 or blocks.shape[2] == 0 or self.bound == 0.0:
            return np.zeros(V.shape[0])
        sv = np.linalg.svd(blocks, compute_uv=False)
        return -self.bound * sv.sum(axis=1) / n

    def batch_frozen_vectors(self, V: np.ndarray, n: int, work_bound: float | None = None) -> np.ndarray:
        """Ambient vectors q_r with shift_r = <v_r, q_r> at the extreme slack.

        Used by the smoothed search to differentiate with the slack frozen at
        its per-direction optimum (block-coordinate step).
        """
        R, d = V.shape
        Q = np.zeros((R, d))
        if self.is_inert:
            return Q
        if self.kind == "box":
            bound = self.bound
            if not np.isfinite(bound):
                bound = work_bound if work_bound is not None else 1.0
            U = self.sign * V[:, self.free_idx] / n
            if not self.one_sided:
                s_free = -np.sign(U) * bound
            else:
                s_free = np.where(U < 0.0, bound, 0.0)
            Q[:, self.free_idx] = self.sign * s_free / n
            return Q
        p, m = self.mat_shape
        mats = V.reshape(R, m, p).transpose(0, 2, 1)
        blocks = self.left.T[None] @ mats @ self.right[None]
        if blocks.shape[1] == 0 or blocks.shape[2] == 0:
            return Q
        A, _, Bt = np.linalg.svd(blocks, full_matrices=False)
        L = -self.sign * self.bound * (A @ Bt)
        emb = self.left[None] @ L @ self.right.T[None]              # (R, p, m)
        Q = self.sign * emb.transpose(0, 2, 1).reshape(R, d) / n    # column-major vec
        return Q

    def zero_slack(self, d: int):
        if self.kind == "box":
            return np.zeros(d)
        return np.zeros((self.left.shape[1], self.right.shape[1]))


@dataclass(frozen=True)
class SolverConfig:
    """Multi-start configuration for the smoothed heuristic search."""

    restarts: int = 64
    surrogate: str = "sigmoid"
    bandwidth_start: float = 1.0
    bandwidth_end: float = 1e-3
    stages: int = 8
    max_iters: int = 200
    step_init: float = 1.0
    step_shrink: float = 0.5
    seed: int = 0
    zero_tol: float = DEFAULT_ZERO_TOL
    pair_seed_cap: int = 256
    net_size: int = 2048
    force_heuristic: bool = False

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.bandwidth_start < self.bandwidth_end:
            raise ValueError("bandwidths must be decreasing")
        if self.surrogate not in ("sigmoid", "smooth_ramp"):
            raise ValueError(f"unknown surrogate {self.surrogate!r}")

    def bandwidths(self) -> np.ndarray:
        if self.stages == 1:
            return np.array([self.bandwidth_end])
        return np.geomspace(self.bandwidth_start, self.bandwidth_end, self.stages)


@dataclass(frozen=True)
class DepthProblem:
    """Influences, a direction subspace, an optional slack channel, a criterion."""

    influences: InfluenceSet
    direction_space: TangentBasis | None = None
    slack: SlackChannel | None = None
    criterion: str = "order1"

    def __post_init__(self):
        if self.direction_space is not None and self.direction_space.ambient_dim != self.influences.d:
            raise ValueError(
                f"direction space ambient dim {self.direction_space.ambient_dim}"
                f" does not match influence dim {self.influences.d}"
            )
        if self.slack is not None and self.slack.kind == "box":
            if self.slack.free_idx.size and int(np.max(self.slack.free_idx)) >= self.influences.d:
                raise ValueError("slack free indices exceed the ambient dimension")
        if self.slack is not None and self.slack.kind == "spectral":
            p, m = self.slack.mat_shape
            if p * m != self.influences.d:
                raise ValueError("spectral slack shape does not match the ambient dimension")


@dataclass
class DepthResult:
    """A depth value with its witnessing direction, slack, and certificate."""

    count: float
    normalized: float
    direction: np.ndarray
    slack_value: np.ndarray | None
    certificate: str
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Counting primitives
# ---------------------------------------------------------------------------


def count_nonneg(x: np.ndarray, tol: float = DEFAULT_ZERO_TOL) -> int:
    """Closed count: 1_{>=0} with zeros (within tol) included."""
    return int(np.sum(np.asarray(x) >= -tol))


def count_halfzero(x: np.ndarray, tol: float = DEFAULT_ZERO_TOL) -> float:
    """Half-open count: zeros (within tol) weigh 0.5, strictly positive entries 1."""
    x = np.asarray(x)
    return float(0.5 * np.sum(np.abs(x) <= tol) + np.sum(x > tol))


def evaluate_01(problem: DepthProblem, v, s=None, zero_tol: float = DEFAULT_ZERO_TOL) -> int:
    """Exact 0-1 count at a direction and slack assignment.

    The direction must be unit length and lie in the problem's direction
    space (within 1e-8); the slack must be feasible for the channel.
    """
    v = np.asarray(v, dtype=float).ravel()
    T = problem.influences
    if v.size != T.d:
        raise ValueError(f"direction has dim {v.size}, expected {T.d}")
    if abs(np.linalg.norm(v) - 1.0) > SPAN_TOL:
        raise ValueError("direction is not unit length")
    B = problem.direction_space
    if B is not None:
        resid = v - B.basis @ (B.basis.T @ v)
        if np.linalg.norm(resid) > SPAN_TOL:
            raise ValueError("direction lies outside the direction space")
    shift = 0.0
    if problem.slack is not None and s is not None:
        problem.slack.check_feasible(s)
        shift = problem.slack.shift_of(v, T.n, s)
    args = T.effective_rows() @ v
    return count_nonneg(args + shift, zero_tol)


# ---------------------------------------------------------------------------
# Exact low-dimensional oracles
# ---------------------------------------------------------------------------


def _candidate_angles(points: np.ndarray) -> np.ndarray:
    """Event angles (directions orthogonal to each point) plus arc midpoints."""
    norms = np.linalg.norm(points, axis=1)
    nz = points[norms > 0.0]
    if nz.shape[0] == 0:
        return np.array([0.0])
    theta = np.arctan2(nz[:, 1], nz[:, 0])
    events = np.concatenate([theta + np.pi / 2.0, theta - np.pi / 2.0]) % (2.0 * np.pi)
    events = np.unique(events)
    mids = (events + np.roll(events, -1)) / 2.0
    mids[-1] = (events[-1] + events[0] + 2.0 * np.pi) / 2.0
    return np.concatenate([events, mids % (2.0 * np.pi)])


def _exact_2d(points: np.ndarray, zero_tol: float = DEFAULT_ZERO_TOL):
    """Exact planar halfspace-depth minimum with a witnessing direction.

    The count is piecewise constant between event angles and takes its
    boundary value exactly at them (the indicator is closed at zero), so
    evaluating all events and arc midpoints is exhaustive.
    """
    angles = _candidate_angles(points)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    counts = np.sum(points @ dirs.T >= -zero_tol, axis=0)
    best = int(np.argmin(counts))
    return int(counts[best]), dirs[best]


def exact_depth_2d(points, zero_tol: float = DEFAULT_ZERO_TOL) -> int:
    """Exact minimum over unit v in R^2 of the closed 0-1 count.

    Sweeps the 2n candidate normals orthogonal to each point plus the
    midpoints between consecutive event angles; zero points always count.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != 2:
        raise ValueError(f"exact_depth_2d needs 2-D points, got dim {points.shape[1]}")
    return _exact_2d(points, zero_tol)[0]


def _exact_1d(points: np.ndarray, zero_tol: float):
    x = points.ravel()
    c_pos = count_nonneg(x, zero_tol)
    c_neg = count_nonneg(-x, zero_tol)
    if c_pos <= c_neg:
        return c_pos, np.array([1.0])
    return c_neg, np.array([-1.0])


# ---------------------------------------------------------------------------
# Surrogates
# ---------------------------------------------------------------------------


def surrogate_functions(name: str):
    """Return (phi, dphi) for a smooth 0-1 surrogate on the standardized argument."""
    if name == "sigmoid":
        def phi(x):
            return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))

        def dphi(x):
            p = phi(x)
            return p * (1.0 - p)

        return phi, dphi
    if name == "smooth_ramp":
        def phi(x):
            u = np.clip((x + 1.0) / 2.0, 0.0, 1.0)
            return u * u * (3.0 - 2.0 * u)

        def dphi(x):
            u = np.clip((x + 1.0) / 2.0, 0.0, 1.0)
            return 3.0 * u * (1.0 - u)

        return phi, dphi
    raise ValueError(f"unknown surrogate {name!r}")


def surrogate_direction_gradient(problem: DepthProblem, v, s, sigma: float, name: str = "sigmoid"):
    """Smoothed objective and its unconstrained gradient in the direction, slack frozen."""
    v = np.asarray(v, dtype=float).ravel()
    T = problem.influences
    eff = T.effective_rows()
    q = np.zeros(T.d)
    if problem.slack is not None and s is not None:
        if problem.slack.kind == "box":
            sv = np.asarray(s, float).ravel()
            q[problem.slack.free_idx] = problem.slack.sign * sv[problem.slack.free_idx] / T.n
        else:
            ch = problem.slack
            emb = ch.left @ np.atleast_2d(np.asarray(s, float)) @ ch.right.T
            q = ch.sign * emb.ravel(order="F") / T.n
    phi, dphi = surrogate_functions(name)
    args = (eff + q) @ v
    value = float(np.sum(phi(args / sigma)))
    grad = (dphi(args / sigma) / sigma) @ (eff + q)
    return value, grad


def surrogate_slack_gradient(problem: DepthProblem, v, s, sigma: float, name: str = "sigmoid"):
    """Smoothed objective and its gradient in the slack, direction frozen.

    For a box channel the gradient is with respect to the free coordinates;
    for a spectral channel it is with respect to the matrix L.
    """
    if problem.slack is None:
        raise ValueError("problem has no slack channel")
    v = np.asarray(v, dtype=float).ravel()
    ch = problem.slack
    T = problem.influences
    phi, dphi = surrogate_functions(name)
    base = T.effective_rows() @ v
    if ch.kind == "box":
        u = ch._coeffs(v, T.n)
        s_free = np.asarray(s, float).ravel()[ch.free_idx]
        args = base + u @ s_free
        value = float(np.sum(phi(args / sigma)))
        grad = float(np.sum(dphi(args / sigma) / sigma)) * u
        return value, grad
    M = ch._direction_block(v, T.n)
    L = np.atleast_2d(np.asarray(s, float))
    args = base + ch.sign * np.tensordot(M, L, axes=2) / T.n
    value = float(np.sum(phi(args / sigma)))
    grad = float(np.sum(dphi(args / sigma) / sigma)) * ch.sign * M / T.n
    return value, grad


# ---------------------------------------------------------------------------
# Slack steps
# ---------------------------------------------------------------------------


def slack_step_01(problem: DepthProblem, v):
    """Exact 0-1 slack step at fixed v: returns (slack, shift) minimizing the count."""
    if problem.slack is None:
        raise ValueError("problem has no slack channel")
    v = np.asarray(v, dtype=float).ravel()
    T = problem.influences
    args = T.effective_rows() @ v
    shift, s = problem.slack.best_shift(v, T.n, args)
    return s, shift


def slack_step_smooth(problem: DepthProblem, v, config: SolverConfig | None = None,
                      sigma: float | None = None):
    """Projected-gradient slack step on the smoothed surrogate at fixed v.

    Descends the box (or spectral-ball) feasible set to stationarity 1e-8;
    the spectral projection clips singular values at the bound.  The target
    bandwidth is reached by annealing from a wide one, since gradients of a
    tight surrogate vanish away from the optimum.  The smoothed objective is
    monotone in the scalar shift, so this lands on the same extreme the
    exact step selects; kept as the generic route of the block-coordinate
    scheme and for verification.
    """
    if problem.slack is None:
        raise ValueError("problem has no slack channel")
    config = config or SolverConfig()
    sigma = config.bandwidth_end if sigma is None else sigma
    ch = problem.slack
    T = problem.influences
    v = np.asarray(v, dtype=float).ravel()
    sigmas = np.geomspace(max(1.0, sigma), sigma, 6)
    if ch.kind == "box":
        bound = ch.bound
        if not np.isfinite(bound):
            args = T.effective_rows() @ v
            bound = 10.0 * T.n * (1.0 + float(np.max(np.abs(args))))
        lo = 0.0 if ch.one_sided else -bound
        hi = bound
        s_free = np.zeros(ch.free_idx.size)

        def value_at(sf, sig):
            s_full = np.zeros(T.d)
            s_full[ch.free_idx] = sf
            val, _ = surrogate_slack_gradient(problem, v, s_full, sig, config.surrogate)
            return val

        for sig in sigmas:
            step = max(1.0, bound)
            for _ in range(200):
                s_full = np.zeros(T.d)
                s_full[ch.free_idx] = s_free
                val, grad = surrogate_slack_gradient(problem, v, s_full, sig, config.surrogate)
                cand = s_free
                for _ in range(40):
                    cand = np.clip(s_free - step * grad, lo, hi)
                    if value_at(cand, sig) <= val + 1e-15:
                        break
                    step *= 0.5
                moved = np.linalg.norm(cand - s_free)
                s_free = cand
                step = min(step * 1.5, 1e6)
                if moved < 1e-8 * (1.0 + np.linalg.norm(s_free)):
                    break
        out = np.zeros(T.d)
        out[ch.free_idx] = s_free
        return out

    # spectral channel
    L = ch.zero_slack(T.d)
    if L.size == 0:
        return L

    def project(Lc):
        A, sv, Bt = np.linalg.svd(Lc, full_matrices=False)
        return (A * np.minimum(sv, ch.bound)) @ Bt

    for sig in sigmas:
        step = max(1.0, ch.bound)
        for _ in range(200):
            val, grad = surrogate_slack_gradient(problem, v, L, sig, config.surrogate)
            cand = L
            for _ in range(40):
                cand = project(L - step * grad)
                cval, _ = surrogate_slack_gradient(problem, v, cand, sig, config.surrogate)
                if cval <= val + 1e-15:
                    break
                step *= 0.5
            moved = np.linalg.norm(cand - L)
            L = cand
            step = min(step * 1.5, 1e6)
            if moved < 1e-8 * (1.0 + np.linalg.norm(L)):
                break
    return L


# ---------------------------------------------------------------------------
# Multi-start heuristic search
# ---------------------------------------------------------------------------


def _sphere_net(k: int, size: int) -> np.ndarray:
    """Deterministic quasi-uniform directions: circle grid (k=2), Fibonacci (k=3)."""
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        ang = np.linspace(0.0, 2.0 * np.pi, size, endpoint=False)
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if k == 3:
        i = np.arange(size) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / size)
        golden = np.pi * (1.0 + np.sqrt(5.0))
        theta = golden * i
        return np.column_stack(
            [np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)]
        )
    raise ValueError("nets are built only for k <= 3")


def _normalize_rows(W: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(W, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    return W / nrm


def _vertex_seeds(nz: np.ndarray, k: int, cap: int, rng: np.random.Generator) -> np.ndarray:
    """Null-space directions of (k-1)-row subsets: arrangement-vertex candidates.

    Optimal halfspace-count directions are attained at data-determined normals
    orthogonal to k-1 points; each vertex is seeded together with versions
    nudged so the tied samples fall on the negative side.
    """
    from itertools import combinations
    from math import comb

    n = nz.shape[0]
    size = k - 1
    if size < 1 or n < size:
        return np.zeros((0, k))
    if comb(n, size) <= cap:
        subsets = np.asarray(list(combinations(range(n), size)))
    else:
        subsets = np.asarray([rng.choice(n, size, replace=False) for _ in range(cap)])
    stacks = nz[subsets]                                  # (S, k-1, k)
    _, _, Vt = np.linalg.svd(stacks, full_matrices=True)
    V0 = _normalize_rows(Vt[:, -1, :])                    # (S, k)
    scale = float(np.max(np.linalg.norm(nz, axis=1)))
    margins = V0 @ nz.T                                   # (S, n)
    tied = np.abs(margins) <= 1e-9 * scale
    U = tied.astype(float) @ nz                           # summed tied rows
    U_t = U - np.sum(U * V0, axis=1, keepdims=True) * V0
    un = np.linalg.norm(U_t, axis=1)
    keep = un > 1e-14
    out = [V0]
    if np.any(keep):
        dir_t = U_t[keep] / un[keep, None]
        for eps in (1e-6, 1e-3):
            out.append(_normalize_rows(V0[keep] - eps * dir_t))
    V = np.vstack(out)
    return np.vstack([V, -V])


def _seed_pool(P: np.ndarray, k: int, config: SolverConfig, rng: np.random.Generator) -> np.ndarray:
    """Candidate directions: influence rows, differences, principal axes of the
    cloud, arrangement vertices, coordinate axes, random draws, low-dim nets."""
    seeds = [np.eye(k), -np.eye(k)]
    norms = np.linalg.norm(P, axis=1)
    nz = P[norms > 0.0]
    if nz.shape[0]:
        if nz.shape[0] > 512:
            nz = nz[rng.choice(nz.shape[0], 512, replace=False)]
        seeds.append(_normalize_rows(nz))
        seeds.append(-_normalize_rows(nz))
        mean = nz.mean(axis=0)
        if np.linalg.norm(mean) > 1e-14:
            seeds.append(_normalize_rows(np.vstack([mean, -mean])))
        _, _, Vt = np.linalg.svd(nz, full_matrices=False)
        pcs = Vt[: min(6, Vt.shape[0])]
        seeds.append(np.vstack([pcs, -pcs]))
        n_nz = nz.shape[0]
        max_pairs = n_nz * (n_nz - 1) // 2
        if max_pairs:
            if max_pairs <= config.pair_seed_cap:
                ii, jj = np.triu_indices(n_nz, k=1)
            else:
                ii = rng.integers(0, n_nz, config.pair_seed_cap)
                jj = rng.integers(0, n_nz, config.pair_seed_cap)
                keep = ii != jj
                ii, jj = ii[keep], jj[keep]
            diffs = nz[ii] - nz[jj]
            dn = np.linalg.norm(diffs, axis=1)
            diffs = diffs[dn > 1e-14]
            if diffs.shape[0]:
                seeds.append(_normalize_rows(diffs))
        if k == 2:
            # the full planar event/midpoint candidate set is small: include
            # it verbatim so the 2-D search cannot miss a narrow optimal arc
            angles = _candidate_angles(nz)
            seeds.append(np.column_stack([np.cos(angles), np.sin(angles)]))
        elif k <= 8:
            seeds.append(_vertex_seeds(nz, k, cap=600, rng=rng))
    rand = rng.standard_normal((8 * max(config.restarts, 16), k))
    seeds.append(_normalize_rows(rand))
    if k <= 3:
        seeds.append(_sphere_net(k, config.net_size if k > 1 else 2))
    return np.vstack([s for s in seeds if s.shape[0]])


class _SlackContext:
    """Reduced-coordinate adapter of a slack channel for the batched search."""

    def __init__(self, chan: SlackChannel | None, basis: np.ndarray | None, n: int,
                 d: int, work_bound: float):
        self.chan = chan
        self.basis = basis
        self.n = n
        self.d = d
        self.work_bound = work_bound
        self.active = chan is not None and not chan.is_inert

    def ambient(self, W: np.ndarray) -> np.ndarray:
        if self.basis is None:
            return W
        return W @ self.basis.T

    def exact_shifts(self, W: np.ndarray) -> np.ndarray:
        if not self.active:
            return np.zeros(W.shape[0])
        return self.chan.batch_shifts(self.ambient(W), self.n)

    def work_shifts(self, W: np.ndarray) -> np.ndarray:
        if not self.active:
            return np.zeros(W.shape[0])
        return self.chan.batch_shifts(self.ambient(W), self.n, work_bound=self.work_bound)

    def frozen_vectors(self, W: np.ndarray) -> np.ndarray | None:
        """Reduced q_r with shift_r = <w_r, q_r> at the per-row extreme slack."""
        if not self.active:
            return None
        Q = self.chan.batch_frozen_vectors(self.ambient(W), self.n, work_bound=self.work_bound)
        if self.basis is None:
            return Q
        return Q @ self.basis


def _refine(P: np.ndarray, ctx: _SlackContext, W: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Batched projected-gradient descent with bandwidth continuation.

    Alternates the closed-form slack step with sphere-projected surrogate
    descent; each restart runs independently and deterministically.
    """
    phi, dphi = surrogate_functions(config.surrogate)
    R = W.shape[0]

    # bandwidths are relative to the data scale so the continuation neither
    # over-smooths (collapsing all restarts) nor starts saturated
    margins0 = np.abs(W @ P.T)
    nonzero = margins0[margins0 > 0.0]
    data_scale = float(np.median(nonzero)) if nonzero.size else 1.0

    def frozen_args(Wc, Q):
        A = Wc @ P.T
        if Q is not None:
            A = A + np.sum(Wc * Q, axis=1, keepdims=True)
        return A

    for sigma in data_scale * config.bandwidths():
        step = np.full(R, config.step_init)
        live = np.ones(R, dtype=bool)
        for _ in range(config.max_iters):
            # block-coordinate step: slack at its per-direction extreme, then
            # a sphere-projected descent step with the slack frozen
            Q = ctx.frozen_vectors(W)
            A = frozen_args(W, Q)
            vals = phi(A / sigma).sum(axis=1)
            D = dphi(A / sigma) / sigma
            G = D @ P
            if Q is not None:
                G = G + D.sum(axis=1, keepdims=True) * Q
            G = G - np.sum(G * W, axis=1, keepdims=True) * W
            gnorm = np.linalg.norm(G, axis=1)
            active = live & (gnorm > 1e-12)
            if not np.any(active):
                break
            accepted = np.zeros(R, dtype=bool)
            W_new = W.copy()
            for _ in range(12):
                trial = ~accepted & active
                if not np.any(trial):
                    break
                cand = _normalize_rows(W[trial] - step[trial, None] * G[trial])
                Qt = None if Q is None else Q[trial]
                cvals = phi(frozen_args(cand, Qt) / sigma).sum(axis=1)
                better = cvals < vals[trial] - 1e-12
                idx = np.nonzero(trial)[0]
                good = idx[better]
                W_new[good] = cand[better]
                accepted[good] = True
                bad = idx[~better]
                step[bad] *= config.step_shrink
            # a row that failed a whole backtracking round retries from its
            # shrunken step; once the step has collapsed it is at a smoothed
            # stationary point for this bandwidth and freezes until the next
            live = live & (accepted | ~active | (step > 1e-8))
            moved = np.linalg.norm(W_new - W, axis=1)
            W = W_new
            step[accepted] = np.minimum(step[accepted] * 1.5, config.step_init)
            if np.max(moved) < 1e-10:
                break
    return W


def _pick_best(counts: np.ndarray, W: np.ndarray):
    """Minimum count with lexicographically smallest direction as tie-break."""
    best = counts.min()
    cand = W[counts == best]
    order = np.lexsort(np.round(cand, 12).T[::-1])
    return best, cand[order[0]]


def _select_diverse(seeds: np.ndarray, counts: np.ndarray, limit: int,
                    cos_cap: float = 0.95) -> np.ndarray:
    """Best-count seeds, greedily skipping near-duplicates of already-chosen ones.

    Ties at a common count otherwise crowd the restart budget with copies of
    one basin; directions within cos_cap of a chosen seed are skipped while
    anything remains.
    """
    order = np.argsort(counts, kind="stable")
    chosen: list[np.ndarray] = []
    for idx in order:
        v = seeds[idx]
        if chosen and np.max(np.asarray(chosen) @ v) > cos_cap:
            continue
        chosen.append(v)
        if len(chosen) == limit:
            break
    for idx in order:
        if len(chosen) == limit:
            break
        v = seeds[idx]
        if not any(np.array_equal(v, c) for c in chosen):
            chosen.append(v)
    return np.asarray(chosen[:limit])


def solve_depth(problem: DepthProblem, config: SolverConfig | None = None) -> DepthResult:
    """Minimize the 0-1 count over unit directions in the problem's subspace.

    Reduced dimension <= 2 without active slack (or dimension 1 with any
    slack) is solved exactly by sweeps and certified ``exact_oracle``; all
    other cases run the multi-start smoothed search and certify
    ``heuristic_upper_bound``.  The reported count is always re-scored by
    the exact 0-1 evaluation at the returned direction and slack.
    """
    config = config or SolverConfig()
    T = problem.influences
    n, d = T.n, T.d
    if n == 0:
        raise ValueError("empty influence set")
    B = problem.direction_space
    basis = None if B is None else B.basis
    k = d if basis is None else basis.shape[1]
    eff = T.effective_rows()
    P = eff if basis is None else eff @ basis
    chan = problem.slack
    active = chan is not None and not chan.is_inert
    tol = config.zero_tol

    if k == 0:
        # trivial direction space: no admissible perturbation, every sample counted
        return DepthResult(
            count=n, normalized=1.0, direction=np.zeros(d),
            slack_value=None if chan is None else chan.zero_slack(d),
            certificate="exact_oracle", diagnostics={"reduced_dim": 0},
        )

    diagnostics = {"reduced_dim": k, "n": n}
    exact = not config.force_heuristic and ((not active and k <= 2) or k == 1)

    if exact:
        if k == 1:
            if active:
                W2 = np.array([[1.0], [-1.0]])
                ctx = _SlackContext(chan, basis, n, d, 0.0)
                shifts = ctx.exact_shifts(W2)
                args = P.ravel()
                counts = np.array([
                    0 if np.isneginf(sh) else count_nonneg(args * row[0] + sh, tol)
                    for row, sh in zip(W2, shifts)
                ])
                idx = int(np.argmin(counts))
                count, w = int(counts[idx]), W2[idx]
            else:
                count, w = _exact_1d(P, tol)
        else:
            count, w = _exact_2d(P, tol)
        certificate = "exact_oracle"
        diagnostics["restarts_used"] = 0
    else:
        rng = np.random.default_rng(config.seed)
        work_bound = 10.0 * n * (1.0 + float(np.max(np.linalg.norm(P, axis=1), initial=0.0)))
        ctx = _SlackContext(chan, basis, n, d, work_bound)
        seeds = _seed_pool(P, k, config, rng)
        shifts = ctx.exact_shifts(seeds)
        args = seeds @ P.T
        counts = np.where(
            np.isneginf(shifts), 0, np.sum(args + np.where(np.isfinite(shifts), shifts, 0.0)[:, None] >= -tol, axis=1)
        )
        top = _select_diverse(seeds, counts, config.restarts)
        refined = _refine(P, ctx, top, config)
        ref_shifts = ctx.exact_shifts(refined)
        ref_counts = np.where(
            np.isneginf(ref_shifts), 0,
            np.sum(refined @ P.T + np.where(np.isfinite(ref_shifts), ref_shifts, 0.0)[:, None] >= -tol, axis=1),
        )
        all_W = np.vstack([seeds, refined])
        all_counts = np.concatenate([counts, ref_counts])
        count, w = _pick_best(all_counts, all_W)
        count = int(count)
        certificate = "heuristic_upper_bound"
        diagnostics["restarts_used"] = int(top.shape[0])
        diagnostics["seed_pool"] = int(seeds.shape[0])
        diagnostics["final_bandwidth"] = config.bandwidth_end

    w = np.asarray(w, float)
    w = w / np.linalg.norm(w)
    direction = w if basis is None else basis @ w
    direction = direction / np.linalg.norm(direction)

    slack_value = None
    args_final = eff @ direction
    shift_final = 0.0
    if chan is not None:
        shift_final, slack_value = chan.best_shift(direction, n, args_final)
    diagnostics["margins"] = args_final + shift_final
    final_count = evaluate_01(problem, direction, slack_value, zero_tol=tol)
    return DepthResult(
        count=final_count,
        normalized=final_count / n,
        direction=direction,
        slack_value=slack_value,
        certificate=certificate,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Order-2 product criterion
# ---------------------------------------------------------------------------


def order2_depth(g_set: InfluenceSet, h_eval, direction_space: TangentBasis | None,
                 config: SolverConfig | None = None, criterion: str = "order2") -> DepthResult:
    """Minimize the order-2 product criterion over unit directions.

    The first factor counts g_i = <v, g-row_i> with the half-open rule (zeros
    weigh one half); the second counts h_i(v) >= 0.  ``h_eval`` is either a callable
    of the ambient direction returning the n-vector h, or a fixed n-vector
    when h is direction-free (in which case low dimensions are exact).
    ``criterion="order2_aggressive"`` scores the per-sample product instead.
    """
    if criterion not in ("order2", "order2_aggressive"):
        raise ValueError(f"unknown order-2 criterion {criterion!r}")
    config = config or SolverConfig()
    tol = config.zero_tol
    n, d = g_set.n, g_set.d
    basis = None if direction_space is None else direction_space.basis
    k = d if basis is None else basis.shape[1]
    eff = g_set.effective_rows()
    P = eff if basis is None else eff @ basis
    h_const = None
    if not callable(h_eval):
        h_const = np.asarray(h_eval, dtype=float)

    def h_at(w):
        if h_const is not None:
            return h_const
        v = w if basis is None else basis @ w
        return np.asarray(h_eval(v), dtype=float)

    def score(w):
        g = P @ w
        c1 = count_halfzero(g, tol)
        h = h_at(w)
        if criterion == "order2":
            return c1 * count_nonneg(h, tol)
        weights = 0.5 * (np.abs(g) <= tol) + (g > tol)
        return float(np.sum(weights * (h >= -tol)))

    if k == 0:
        denom = float(n * n if criterion == "order2" else n)
        return DepthResult(denom, 1.0, np.zeros(d), None, "exact_oracle", {"reduced_dim": 0})

    diagnostics = {"reduced_dim": k, "n": n}
    if k == 1:
        cands = np.array([[1.0], [-1.0]])
        scores = [score(c) for c in cands]
        idx = int(np.argmin(scores))
        best, w = scores[idx], cands[idx]
        certificate = "exact_oracle"
    elif k == 2:
        angles = np.concatenate([
            _candidate_angles(P),
            np.linspace(0.0, 2.0 * np.pi, 3600, endpoint=False),
        ])
        cands = np.column_stack([np.cos(angles), np.sin(angles)])
        scores = np.array([score(c) for c in cands])
        idx = int(np.argmin(scores))
        best, w = float(scores[idx]), cands[idx]
        certificate = "exact_oracle" if h_const is not None else "heuristic_upper_bound"
    else:
        rng = np.random.default_rng(config.seed)
        seeds = _seed_pool(P, k, config, rng)
        scores = np.array([score(s) for s in seeds])
        order = np.argsort(scores, kind="stable")
        pool = [(float(scores[i]), seeds[i]) for i in order[: config.restarts]]
        refined = []
        for val, w0 in pool:
            w = w0.copy()
            for tau in np.geomspace(0.3, 1e-3, 6):
                for _ in range(20):
                    cand = w + tau * rng.standard_normal(k)
                    cand /= np.linalg.norm(cand)
                    cval = score(cand)
                    if cval < val:
                        val, w = cval, cand
            refined.append((val, w))
        best, w = min(pool + refined, key=lambda t: (t[0], tuple(np.round(t[1], 12))))
        certificate = "heuristic_upper_bound"

    direction = w if basis is None else basis @ w
    direction = direction / np.linalg.norm(direction)
    diagnostics["margins"] = P @ w
    denom = n * n if criterion == "order2" else n
    return DepthResult(
        count=float(best),
        normalized=float(best) / denom,
        direction=direction,
        slack_value=None,
        certificate=certificate,
        diagnostics=diagnostics,
    )
