"""Command-line driver: depth evaluation, ranking, fitting, deepest search, checks.

    depthforge <task> --family <name> --data X.csv [--response y.csv]
               --param beta.csv [--lambda L] [--q Q] [--rank R]
               [--rule soft|hard|scad|mcp] [--loss squared|logistic|huber]
               [--seed S] [--restarts K] --out report.csv [--fig plot.png]

Exit codes: 0 success, 2 validation error, 3 numeric failure.  The machine
report goes to --out (byte-identical for identical inputs and seed; wall time
is printed only on standard output), an optional figure is rendered next to
it, and DEPTHFORGE_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import figures
from .dataio import (
    ValidationError,
    format_float,
    format_vector,
    load_csv,
    load_parameter,
    parse_config_file,
    save_parameter,
    write_report,
    write_table,
)
from .estimators import deepest_search, fit_piq, fit_rrr, fit_tisp, make_rrr_sampler, make_sparse_sampler
from .influences import HuberLoss, get_loss, location_influence, regression_influence
from .riemannian import (
    oc_depth,
    pc_depth,
    vmf_depth,
    vmf_order2_depth,
    watson_depth,
    watson_order2_depth,
)
from .slack import (
    default_lambda,
    nonnegative_regression_depth,
    rrr_depth,
    sparse_rrr_depth,
    theta_depth,
    theta_sharp_depth,
)
from .solver import DepthProblem, SolverConfig, solve_depth
from .thresholding import (
    ThresholdRule,
    check_rrr_fixed_point,
    check_theta_fixed_point,
    discontinuity_gap,
    quantile_threshold,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

FAMILIES = (
    "location", "regression", "nonneg", "watson", "vmf", "vmf2", "watson2",
    "pc", "oc", "theta", "theta_sharp", "rrr", "sparse_rrr",
)
TWO_PARAM_FAMILIES = {"pc", "oc", "sparse_rrr"}
RESPONSE_FAMILIES = {"regression", "nonneg", "theta", "theta_sharp", "rrr", "sparse_rrr"}
FIT_FAMILIES = {"regression", "theta", "theta_sharp", "rrr"}
DEEPEST_FAMILIES = {"rrr", "theta_sharp"}
CHECK_FAMILIES = {"theta", "theta_sharp", "rrr"}

_CONFIG_KEYS = {
    "lambda": ("lam", float),
    "q": ("q", int),
    "rank": ("rank", int),
    "rule": ("rule", str),
    "loss": ("loss", str),
    "seed": ("seed", int),
    "restarts": ("restarts", int),
    "budget": ("budget", int),
    "kappa_sign": ("kappa_sign", int),
    "huber_delta": ("huber_delta", float),
    "rho": ("rho", float),
}
_SOLVER_KEYS = {
    "restarts": int,
    "stages": int,
    "max_iters": int,
    "surrogate": str,
    "bandwidth_start": float,
    "bandwidth_end": float,
    "zero_tol": float,
    "net_size": int,
    "pair_seed_cap": int,
}


@dataclass
class RunConfig:
    """A fully merged, validated run: task, family, data, and hyperparameters."""

    task: str
    family: str
    data_path: str
    response_path: str | None
    param_specs: list[str]
    out: str
    fig: str | None
    param_out: str | None
    lam: float | None
    q: int | None
    rank: int | None
    rule: str | None
    loss: str
    kappa_sign: int
    huber_delta: float
    rho: float | None
    seed: int
    budget: int
    solver: SolverConfig
    solver_overrides: dict = field(default_factory=dict)

    def require(self, names: list[str]) -> None:
        for name in names:
            if getattr(self, name) is None:
                flag = {"lam": "--lambda", "rank": "--rank"}.get(name, f"--{name}")
                raise ValidationError(f"family {self.family!r} requires {flag}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthforge",
        description="Generalized Tukey depths for curved and nonsmooth estimation problems.",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task, helptext in (
        ("depth", "evaluate the depth of one candidate parameter"),
        ("rank", "rank several candidate parameters by depth"),
        ("fit", "fit the family's reference estimator"),
        ("deepest", "search for a deeper estimate by seeded sampling"),
        ("check", "evaluate a fixed-point residual at a candidate"),
    ):
        sp = sub.add_parser(task, help=helptext)
        sp.add_argument("--family", required=True, choices=FAMILIES)
        sp.add_argument("--data", required=True, help="CSV data table (rows = samples)")
        sp.add_argument("--response", help="CSV response vector/matrix where the family needs one")
        sp.add_argument("--param", action="append", default=[],
                        help="parameter file; two-parameter families join a pair with ':' "
                             "('none' drops an intercept); repeat for rank candidates")
        sp.add_argument("--lambda", dest="lam", type=float, help="threshold / slack bound")
        sp.add_argument("--q", type=int, help="sparsity level")
        sp.add_argument("--rank", type=int, help="rank constraint")
        sp.add_argument("--rule", choices=("soft", "hard", "scad", "mcp"))
        sp.add_argument("--loss", choices=("squared", "logistic", "huber"))
        sp.add_argument("--kappa-sign", dest="kappa_sign", type=int, choices=(1, -1))
        sp.add_argument("--huber-delta", dest="huber_delta", type=float)
        sp.add_argument("--rho", type=float, help="surrogate step constant (fit/check)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--restarts", type=int)
        sp.add_argument("--budget", type=int, help="candidates for the deepest search")
        sp.add_argument("--config", help="flat key-value config file (solver.restarts=64)")
        sp.add_argument("--out", required=True, help="machine-readable report path")
        sp.add_argument("--fig", help="render a PNG figure alongside the report")
        sp.add_argument("--param-out", dest="param_out", help="write the fitted/deepest parameter here")
    return parser


def merge_config(args: argparse.Namespace) -> RunConfig:
    """Merge CLI flags over config-file values over defaults and build the run."""
    file_vals: dict[str, str] = {}
    if args.config:
        file_vals = parse_config_file(args.config)
    solver_overrides: dict = {}
    plain: dict[str, object] = {}
    for key, raw in file_vals.items():
        if key.startswith("solver."):
            name = key[len("solver."):]
            if name not in _SOLVER_KEYS:
                raise ValidationError(f"unknown solver config key {key!r}")
            solver_overrides[name] = _SOLVER_KEYS[name](raw)
        elif key in _CONFIG_KEYS:
            dest, conv = _CONFIG_KEYS[key]
            plain[dest] = conv(raw)
        else:
            raise ValidationError(f"unknown config key {key!r}")

    def pick(name, default=None):
        val = getattr(args, name, None)
        if val is not None:
            return val
        if name in plain:
            return plain[name]
        return default

    seed = int(pick("seed", 0))
    restarts = pick("restarts")
    solver_kwargs = dict(solver_overrides)
    if restarts is not None:
        solver_kwargs["restarts"] = int(restarts)
    solver_kwargs.setdefault("seed", seed)
    solver = SolverConfig(**solver_kwargs)
    return RunConfig(
        task=args.task,
        family=args.family,
        data_path=args.data,
        response_path=args.response,
        param_specs=list(args.param),
        out=args.out,
        fig=args.fig,
        param_out=args.param_out,
        lam=pick("lam"),
        q=pick("q"),
        rank=pick("rank"),
        rule=pick("rule"),
        loss=pick("loss", "squared"),
        kappa_sign=int(pick("kappa_sign", 1)),
        huber_delta=float(pick("huber_delta", 1.345)),
        rho=pick("rho"),
        seed=seed,
        budget=int(pick("budget", 100)),
        solver=solver,
        solver_overrides=solver_overrides,
    )


# ---------------------------------------------------------------------------
# Shared loading and dispatch
# ---------------------------------------------------------------------------


def _load_params(cfg: RunConfig, spec: str):
    """Load one candidate's parameter file(s); ':'-joined pairs, 'none' = dropped."""
    parts = spec.split(":")
    expected = 2 if cfg.family in TWO_PARAM_FAMILIES else 1
    if len(parts) != expected:
        raise ValidationError(
            f"family {cfg.family!r} takes {expected} parameter file(s) per candidate, "
            f"got {spec!r}"
        )
    out = []
    for part in parts:
        if part in ("-", "none"):
            out.append(None)
        else:
            out.append(load_parameter(part))
    if expected == 1 and out[0] is None:
        raise ValidationError(f"family {cfg.family!r} needs a real parameter file, got {spec!r}")
    return out


def _load_response(cfg: RunConfig, as_vector: bool):
    if cfg.response_path is None:
        raise ValidationError(f"family {cfg.family!r} requires --response")
    table = load_csv(cfg.response_path)
    if as_vector:
        if table.shape[1] != 1:
            raise ValidationError(
                f"{cfg.response_path}: expected a single response column, got {table.shape[1]}"
            )
        return table.ravel()
    return table


def _loss_for(cfg: RunConfig):
    if cfg.loss == "huber":
        return HuberLoss(cfg.huber_delta)
    return get_loss(cfg.loss)


def _rule_for(cfg: RunConfig, lam: float) -> ThresholdRule:
    if cfg.rule is None:
        raise ValidationError(f"family {cfg.family!r} requires --rule")
    return ThresholdRule(cfg.rule, lam)


def compute_depth(cfg: RunConfig, params):
    """Dispatch one depth evaluation; returns (DepthResult, echo dict)."""
    fam = cfg.family
    data = load_csv(cfg.data_path)
    echo: dict[str, str] = {}
    if fam == "location":
        (mu,) = params
        result = solve_depth(DepthProblem(influences=location_influence(data, mu)), cfg.solver)
    elif fam == "regression":
        (beta,) = params
        y = _load_response(cfg, as_vector=True)
        result = solve_depth(DepthProblem(influences=regression_influence(data, y, beta)), cfg.solver)
    elif fam == "nonneg":
        (beta,) = params
        y = _load_response(cfg, as_vector=True)
        result = nonnegative_regression_depth(data, y, beta, cfg.solver)
    elif fam == "theta":
        (beta,) = params
        y = _load_response(cfg, as_vector=True)
        lam = cfg.lam if cfg.lam is not None else default_lambda(data, y, beta)
        rule = _rule_for(cfg, lam)
        result = theta_depth(data, y, beta, rule, _loss_for(cfg), cfg.solver)
        echo["lambda"] = format_float(lam)
        echo["rule"] = rule.kind
        echo["loss"] = cfg.loss
    elif fam == "theta_sharp":
        (beta,) = params
        y = _load_response(cfg, as_vector=True)
        q = cfg.q if cfg.q is not None else int(np.count_nonzero(beta))
        result = theta_sharp_depth(data, y, beta, q, _loss_for(cfg), cfg.solver)
        echo["q"] = str(q)
        echo["loss"] = cfg.loss
    elif fam == "rrr":
        (B,) = params
        Y = _load_response(cfg, as_vector=False)
        r = cfg.rank if cfg.rank is not None else int(np.linalg.matrix_rank(np.atleast_2d(B)))
        result = rrr_depth(data, Y, np.atleast_2d(B), r, cfg.solver)
        echo["rank"] = str(r)
    elif fam == "sparse_rrr":
        A, U = params
        if A is None or U is None:
            raise ValidationError("sparse_rrr candidates are 'A.csv:U.csv' pairs")
        Y = _load_response(cfg, as_vector=False)
        q = cfg.q if cfg.q is not None else int(np.count_nonzero(A))
        result = sparse_rrr_depth(data, Y, np.atleast_2d(A), np.atleast_2d(U), q, cfg.solver)
        echo["q"] = str(q)
    elif fam == "watson":
        (mu,) = params
        result = watson_depth(data, mu, cfg.solver)
    elif fam == "vmf":
        (mu,) = params
        result = vmf_depth(data, mu, cfg.solver)
    elif fam == "vmf2":
        (mu,) = params
        result = vmf_order2_depth(data, mu, cfg.solver)
    elif fam == "watson2":
        (mu,) = params
        result = watson_order2_depth(data, mu, cfg.kappa_sign, cfg.solver)
        echo["kappa_sign"] = str(cfg.kappa_sign)
    elif fam == "pc":
        mu, U = params
        if U is None:
            raise ValidationError("pc candidates are 'mu.csv:U.csv' pairs ('none' drops the intercept)")
        result = pc_depth(data, mu, np.atleast_2d(U), cfg.solver)
    elif fam == "oc":
        mu, U = params
        if U is None:
            raise ValidationError("oc candidates are 'mu.csv:U.csv' pairs ('none' drops the intercept)")
        result = oc_depth(data, mu, np.atleast_2d(U), cfg.solver)
    else:  # pragma: no cover
        raise ValidationError(f"unknown family {fam!r}")
    echo["n"] = str(data.shape[0])
    return result, echo


def _slack_summary(result) -> str:
    s = result.slack_value
    if s is None:
        return "none"
    s = np.asarray(s)
    if s.ndim <= 1:
        return f"box;linf={format_float(np.max(np.abs(s)) if s.size else 0.0)}"
    norm2 = np.linalg.norm(s, 2) if s.size else 0.0
    return f"spectral;norm2={format_float(norm2)}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_depth(cfg: RunConfig) -> int:
    if len(cfg.param_specs) != 1:
        raise ValidationError("depth takes exactly one --param candidate")
    t0 = time.perf_counter()
    params = _load_params(cfg, cfg.param_specs[0])
    result, echo = compute_depth(cfg, params)
    elapsed = time.perf_counter() - t0
    items = [
        ("task", "depth"),
        ("family", cfg.family),
        ("n", echo["n"]),
        ("ambient_dim", str(result.direction.size)),
        ("reduced_dim", str(result.diagnostics.get("reduced_dim", result.direction.size))),
        ("count", format_float(result.count) if isinstance(result.count, float) else str(result.count)),
        ("normalized", format_float(result.normalized)),
        ("certificate", result.certificate),
        ("direction", format_vector(result.direction)),
        ("slack", _slack_summary(result)),
        ("seed", str(cfg.seed)),
        ("restarts", str(cfg.solver.restarts)),
    ]
    for key in sorted(k for k in echo if k != "n"):
        items.append((key, echo[key]))
    write_report(cfg.out, items)
    if cfg.fig:
        margins = result.diagnostics.get("margins", np.zeros(int(echo["n"])))
        figures.render_depth_margins(margins, result.count, int(echo["n"]), cfg.fig)
    print(f"depth {cfg.family}: count={result.count} normalized={result.normalized:.6g} "
          f"({result.certificate}) in {elapsed:.2f}s -> {cfg.out}")
    return EXIT_OK


def cmd_rank(cfg: RunConfig) -> int:
    if len(cfg.param_specs) < 2:
        raise ValidationError("rank needs at least two --param candidates")
    t0 = time.perf_counter()
    loaded = [_load_params(cfg, spec) for spec in cfg.param_specs]
    shapes = [tuple(None if p is None else np.asarray(p).shape for p in params) for params in loaded]
    if len(set(shapes)) != 1:
        raise ValidationError(f"candidates have mixed shapes: {sorted(set(shapes))}")
    results = []
    for spec, params in zip(cfg.param_specs, loaded):
        result, _ = compute_depth(cfg, params)
        results.append((spec, result))
    order = sorted(range(len(results)), key=lambda i: (-results[i][1].normalized, i))
    rows = []
    for pos, i in enumerate(order, start=1):
        spec, res = results[i]
        count_repr = format_float(res.count) if isinstance(res.count, float) else str(res.count)
        rows.append((pos, spec, count_repr, format_float(res.normalized), res.certificate))
    write_table(cfg.out, ("rank", "candidate", "count", "normalized", "certificate"), rows)
    elapsed = time.perf_counter() - t0
    if cfg.fig:
        figures.render_rank_chart(
            [results[i][0] for i in order], [results[i][1].normalized for i in order], cfg.fig
        )
    print(f"rank {cfg.family}: {len(results)} candidates in {elapsed:.2f}s -> {cfg.out}")
    for pos, i in enumerate(order, start=1):
        spec, res = results[i]
        print(f"  {pos}. {spec}  depth={res.normalized:.6g} ({res.certificate})")
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    if cfg.family not in FIT_FAMILIES:
        raise ValidationError(f"fit supports families {sorted(FIT_FAMILIES)}, not {cfg.family!r}")
    t0 = time.perf_counter()
    X = load_csv(cfg.data_path)
    if cfg.family == "rrr":
        Y = _load_response(cfg, as_vector=False)
        cfg.require(["rank"])
        fit = fit_rrr(X, Y, cfg.rank)
    elif cfg.family == "regression":
        y = _load_response(cfg, as_vector=True)
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid_norm = float(np.linalg.norm(X.T @ (X @ beta - y)))
        from .estimators import FitResult

        fit = FitResult(
            parameter=beta, iterations=1, converged=True,
            objective=0.5 * float(np.linalg.norm(X @ beta - y) ** 2),
            fixed_point_residual=resid_norm, diagnostics={},
        )
    elif cfg.family == "theta":
        y = _load_response(cfg, as_vector=True)
        cfg.require(["lam"])
        rule = _rule_for(cfg, cfg.lam)
        fit = fit_tisp(X, y, rule, _loss_for(cfg), rho=cfg.rho)
    else:  # theta_sharp
        y = _load_response(cfg, as_vector=True)
        cfg.require(["q"])
        fit = fit_piq(X, y, cfg.q, _loss_for(cfg), rho=cfg.rho)
    elapsed = time.perf_counter() - t0
    param = np.asarray(fit.parameter)
    items = [
        ("task", "fit"),
        ("family", cfg.family),
        ("n", str(X.shape[0])),
        ("converged", str(fit.converged).lower()),
        ("iterations", str(fit.iterations)),
        ("objective", format_float(fit.objective)),
        ("fixed_point_residual", format_float(fit.fixed_point_residual)),
        ("parameter_shape", "x".join(str(s) for s in param.shape)),
        ("parameter", format_vector(param)),
        ("seed", str(cfg.seed)),
    ]
    write_report(cfg.out, items)
    if cfg.param_out:
        save_parameter(cfg.param_out, param)
    print(f"fit {cfg.family}: converged={fit.converged} iters={fit.iterations} "
          f"residual={fit.fixed_point_residual:.3g} in {elapsed:.2f}s -> {cfg.out}")
    return EXIT_OK


def cmd_deepest(cfg: RunConfig) -> int:
    if cfg.family not in DEEPEST_FAMILIES:
        raise ValidationError(
            f"deepest supports families {sorted(DEEPEST_FAMILIES)}, not {cfg.family!r}"
        )
    t0 = time.perf_counter()
    X = load_csv(cfg.data_path)
    base = None
    if cfg.param_specs:
        if len(cfg.param_specs) != 1:
            raise ValidationError("deepest takes at most one --param (the base fit)")
        (base,) = _load_params(cfg, cfg.param_specs[0])
    if cfg.family == "rrr":
        Y = _load_response(cfg, as_vector=False)
        cfg.require(["rank"])
        sampler = make_rrr_sampler(X, Y, cfg.rank, base=base)
        depth_fn = lambda B: rrr_depth(X, Y, B, cfg.rank, cfg.solver)
    else:
        y = _load_response(cfg, as_vector=True)
        cfg.require(["q"])
        sampler = make_sparse_sampler(X, y, cfg.q, loss=_loss_for(cfg), base=base)
        depth_fn = lambda b: theta_sharp_depth(X, y, b, cfg.q, _loss_for(cfg), cfg.solver)
    best_param, best = deepest_search(depth_fn, sampler, cfg.budget, seed=cfg.seed)
    elapsed = time.perf_counter() - t0
    trace = best.diagnostics.get("trace_normalized", [])
    items = [
        ("task", "deepest"),
        ("family", cfg.family),
        ("n", str(X.shape[0])),
        ("budget", str(cfg.budget)),
        ("evaluated", str(best.diagnostics.get("candidates_evaluated", 0))),
        ("skipped", str(best.diagnostics.get("candidates_skipped", 0))),
        ("best_index", str(best.diagnostics.get("best_index", 0))),
        ("count", format_float(best.count) if isinstance(best.count, float) else str(best.count)),
        ("normalized", format_float(best.normalized)),
        ("certificate", best.certificate),
        ("parameter_shape", "x".join(str(s) for s in np.asarray(best_param).shape)),
        ("parameter", format_vector(best_param)),
        ("seed", str(cfg.seed)),
    ]
    write_report(cfg.out, items)
    if cfg.param_out:
        save_parameter(cfg.param_out, best_param)
    if cfg.fig and len(trace):
        figures.render_deepest_trace(trace, cfg.fig)
    print(f"deepest {cfg.family}: best normalized depth {best.normalized:.6g} "
          f"at candidate {best.diagnostics.get('best_index', 0)} in {elapsed:.2f}s -> {cfg.out}")
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    if cfg.family not in CHECK_FAMILIES:
        raise ValidationError(f"check supports families {sorted(CHECK_FAMILIES)}, not {cfg.family!r}")
    if len(cfg.param_specs) != 1:
        raise ValidationError("check takes exactly one --param candidate")
    t0 = time.perf_counter()
    X = load_csv(cfg.data_path)
    (param,) = _load_params(cfg, cfg.param_specs[0])
    extra: list[tuple[str, str]] = []
    if cfg.family == "rrr":
        Y = _load_response(cfg, as_vector=False)
        B = np.atleast_2d(param)
        r = cfg.rank if cfg.rank is not None else int(np.linalg.matrix_rank(B))
        rho = cfg.rho if cfg.rho is not None else 1.01 * float(np.linalg.norm(X, 2)) ** 2
        residual = check_rrr_fixed_point(B, X, Y, r, rho)
        extra += [("rank", str(r)), ("rho", format_float(rho))]
    else:
        y = _load_response(cfg, as_vector=True)
        beta = np.asarray(param, dtype=float).ravel()
        loss = _loss_for(cfg)
        rho = cfg.rho if cfg.rho is not None else 1.01 * loss.lipschitz * float(np.linalg.norm(X, 2)) ** 2
        if cfg.family == "theta":
            cfg.require(["lam"])
            rule = _rule_for(cfg, cfg.lam)
            scale = 1.0 / np.sqrt(rho)
            Xs = scale * X
            beta_s = beta / scale
            residual = check_theta_fixed_point(beta_s, Xs, y, loss, rule)
            args = beta_s - Xs.T @ loss.derivative(Xs @ beta_s, y)
            extra += [
                ("rule", rule.kind),
                ("lambda", format_float(cfg.lam)),
                ("rho", format_float(rho)),
                ("discontinuity_gap", format_float(discontinuity_gap(rule, args))),
            ]
        else:  # theta_sharp
            q = cfg.q if cfg.q is not None else int(np.count_nonzero(beta))
            grad = X.T @ loss.derivative(X @ beta, y)
            residual = float(np.linalg.norm(beta - quantile_threshold(beta - grad / rho, q)))
            extra += [("q", str(q)), ("rho", format_float(rho))]
    elapsed = time.perf_counter() - t0
    passed = residual < 1e-8
    items = [
        ("task", "check"),
        ("family", cfg.family),
        ("residual", format_float(residual)),
        ("pass", str(passed).lower()),
        ("tolerance", format_float(1e-8)),
    ] + extra
    write_report(cfg.out, items)
    print(f"check {cfg.family}: residual={residual:.3g} pass={passed} in {elapsed:.2f}s -> {cfg.out}")
    return EXIT_OK


COMMANDS = {
    "depth": cmd_depth,
    "rank": cmd_rank,
    "fit": cmd_fit,
    "deepest": cmd_deepest,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = merge_config(args)
        return COMMANDS[cfg.task](cfg)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
