"""Experiment runner: parameter sweeps, rate studies and diagnostics.

Produces the deterministic row structures behind the ``results.csv`` /
``rate.csv`` / ``diag.csv`` artifacts.  Rows are ordered by method, then
subspace dimension, then iteration count; infeasible cells become rows with
empty ``alpha``/``rel_error`` fields rather than failures.  Per-row times
count the shared decomposition once plus the cell's own work, and are
recorded only when ``timings`` is enabled (them being wall-clock, they are
the one intentionally nondeterministic column; everything else is
byte-reproducible).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .decomp import arnoldi_decompose, estimate_h_ell, golub_kahan_bidiagonalize
from .operators import NonSquareOperatorError, spectral_norm_estimate
from .params import ParamStrategy
from .problems import TestProblem, assumption_diagnostics, build_problem
from .rng import derive_seed
from .solvers import (
    PowerConfig,
    RegularizationConfig,
    finish_subspace,
    solve_on_subspace,
)

RESULTS_HEADER = "method,ell,i,strategy,alpha,rel_error,feasible,h_ell,delta,time_s"
RATE_HEADER = "xi,delta,ell,h_ell,alpha,rel_error,feasible"
DIAG_HEADER = "ell,igkt_gap,igkt_gamma,igkt_h_rel,iat_gap,iat_gamma,iat_h_rel"


@dataclass(frozen=True)
class ProblemSpec:
    """Recipe for a synthetic problem: generator name plus parameters."""

    name: str
    n: int
    xi: float
    seed: int
    params: Dict[str, float] = field(default_factory=dict)

    def build(self) -> TestProblem:
        return build_problem(self.name, self.n, self.xi, self.seed, **self.params)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a problem, a method selection and (ell, i) grids."""

    problem: ProblemSpec
    method: str  # "igkt" | "iat" | "both"
    ells: Sequence[int]
    iters: Sequence[int]
    strategy: ParamStrategy
    emit_images: bool = False
    dump_decomp: bool = False
    timings: bool = False
    reorthogonalize: bool = True
    breakdown_tol: float = 1e-12
    rank_tol: float = 1e-12
    power: PowerConfig = field(default_factory=PowerConfig)

    def __post_init__(self):
        if self.method not in ("igkt", "iat", "both"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.ells or not self.iters:
            raise ValueError("ell and i lists must be nonempty")
        if any(ell < 1 for ell in self.ells) or any(i < 1 for i in self.iters):
            raise ValueError("ell and i values must be >= 1")

    @property
    def methods(self) -> List[str]:
        return ["igkt", "iat"] if self.method == "both" else [self.method]


@dataclass(frozen=True)
class ResultRow:
    """One CSV row of a sweep."""

    method: str
    ell: int
    i: int
    strategy: str
    alpha: Optional[float]
    rel_error: Optional[float]
    feasible: bool
    h_ell: Optional[float]
    delta: float
    time_s: float


@dataclass(frozen=True)
class LabeledImage:
    name: str
    shape: Tuple[int, int]
    values: np.ndarray  # flattened, row-major


@dataclass(frozen=True)
class LabeledMatrix:
    name: str
    values: np.ndarray


@dataclass(frozen=True)
class ExperimentResult:
    rows: List[ResultRow]
    images: List[LabeledImage]
    dumps: List[LabeledMatrix]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(header: str, rows: Sequence[Sequence]) -> str:
    lines = [header]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def render_results_csv(rows: Sequence[ResultRow]) -> str:
    return render_csv(
        RESULTS_HEADER,
        [
            (
                r.method,
                r.ell,
                r.i,
                r.strategy,
                r.alpha,
                r.rel_error,
                r.feasible,
                r.h_ell,
                r.delta,
                r.time_s,
            )
            for r in rows
        ],
    )


def _decompose(
    problem: TestProblem,
    method: str,
    ell: int,
    reorthogonalize: bool = True,
    breakdown_tol: float = 1e-12,
):
    kwargs = dict(reorthogonalize=reorthogonalize, breakdown_tol=breakdown_tol)
    if method == "igkt":
        return golub_kahan_bidiagonalize(problem.op, problem.y_delta, ell, **kwargs)
    return arnoldi_decompose(problem.op, problem.y_delta, ell, **kwargs)


def run_experiment(
    cfg: ExperimentConfig, problem: Optional[TestProblem] = None
) -> ExperimentResult:
    """Run every (method, ell, i) cell of a sweep on one problem instance.

    The problem is built once; for each ``ell`` one decomposition (plus one
    approximation bound) is built and reused across the whole ``i`` list.
    """
    if problem is None:
        problem = cfg.problem.build()
    if not problem.op.is_square and cfg.method in ("iat", "both"):
        raise NonSquareOperatorError(
            f"method {cfg.method!r} needs a square operator, got "
            f"{problem.op.n_rows}x{problem.op.n_cols} ({problem.op.label})"
        )
    ells = sorted(set(int(e) for e in cfg.ells))
    iters = sorted(set(int(i) for i in cfg.iters))
    strategy = cfg.strategy
    rows: List[ResultRow] = []
    images: List[LabeledImage] = []
    dumps: List[LabeledMatrix] = []

    if cfg.emit_images and problem.image_shape is not None:
        images.append(
            LabeledImage("exact", problem.image_shape, problem.x_dagger.copy())
        )
        images.append(
            LabeledImage("observed", problem.image_shape, problem.y_delta.copy())
        )

    for method in cfg.methods:
        for ell in ells:
            reg_cfg = RegularizationConfig(
                ell=ell,
                iterations=iters[0],
                strategy=strategy,
                reorthogonalize=cfg.reorthogonalize,
                breakdown_tol=cfg.breakdown_tol,
                rank_tol=cfg.rank_tol,
                power=cfg.power,
            )
            shared_start = time.perf_counter()
            decomp = _decompose(
                problem, method, ell, cfg.reorthogonalize, cfg.breakdown_tol
            )
            prep = finish_subspace(
                problem.op, problem.y_delta, reg_cfg, method, decomp
            )
            shared_time = time.perf_counter() - shared_start
            if cfg.dump_decomp:
                tag = f"{method}_l{ell}"
                dumps.append(LabeledMatrix(f"{tag}_left", decomp.left))
                dumps.append(LabeledMatrix(f"{tag}_right", decomp.right))
                dumps.append(LabeledMatrix(f"{tag}_reduced", decomp.matrix))
            for i in iters:
                report = solve_on_subspace(
                    prep,
                    i,
                    strategy,
                    problem.delta,
                    x_dagger=problem.x_dagger,
                )
                elapsed = shared_time + report.wall_time
                rows.append(
                    ResultRow(
                        method=method,
                        ell=ell,
                        i=i,
                        strategy=strategy.label(),
                        alpha=report.alpha,
                        rel_error=report.rel_error,
                        feasible=report.feasible,
                        h_ell=report.h_ell,
                        delta=problem.delta,
                        time_s=elapsed if cfg.timings else 0.0,
                    )
                )
                if (
                    cfg.emit_images
                    and problem.image_shape is not None
                    and report.feasible
                ):
                    tag = f"{method}_l{ell}_i{i}"
                    images.append(
                        LabeledImage(f"restored_{tag}", problem.image_shape, report.x)
                    )
                    images.append(
                        LabeledImage(
                            f"residual_{tag}",
                            problem.image_shape,
                            problem.x_dagger - report.x,
                        )
                    )
    return ExperimentResult(rows=rows, images=images, dumps=dumps)


# ---------------------------------------------------------------------------
# convergence-rate study


@dataclass(frozen=True)
class RatePoint:
    xi: float
    delta: float
    ell: Optional[int]
    h_ell: Optional[float]
    alpha: Optional[float]
    rel_error: Optional[float]
    feasible: bool


@dataclass(frozen=True)
class RateStudyResult:
    points: List[RatePoint]
    slope: Optional[float]


def fit_loglog_slope(deltas: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(delta)."""
    logd = np.log(np.asarray(deltas, dtype=np.float64))
    loge = np.log(np.asarray(errors, dtype=np.float64))
    return float(np.polyfit(logd, loge, 1)[0])


def rate_study(
    problem: ProblemSpec,
    nu: float,
    xis: Sequence[float],
    iterations: int,
    ell_max: int,
    c: float = 1.0,
    rho: float = 1.0,
    reorthogonalize: bool = True,
    power: PowerConfig = PowerConfig(max_iters=80, rel_tol=1e-6),
) -> RateStudyResult:
    """Error-versus-noise rate measurement under a smoothness condition.

    The exact solution is a source-condition element of order ``nu`` drawn
    once from the problem seed; for each noise level the same noise
    direction is rescaled, the smallest subspace dimension with
    ``h_ell <= delta`` is selected (coupling the approximation bound to the
    noise bound), and the solve uses the known-norm strategy with the given
    ``c``.  The slope of log error against log delta is fitted over the
    feasible points (at least three are required).
    """
    params = dict(problem.params)
    params["nu"] = nu
    params["rho"] = rho
    points: List[RatePoint] = []
    for xi in xis:
        inst = build_problem(problem.name, problem.n, xi, problem.seed, **params)
        ell_cap = min(ell_max, min(inst.op.shape))
        decomp = golub_kahan_bidiagonalize(
            inst.op, inst.y_delta, ell_cap, reorthogonalize=reorthogonalize
        )
        chosen = None
        h_chosen = None
        for ell in range(1, decomp.ell_eff + 1):
            h = estimate_h_ell(
                inst.op,
                decomp.prefix(ell),
                max_iters=power.max_iters,
                rel_tol=power.rel_tol,
                seed=derive_seed(problem.seed, ("h-power", ell)),
            )
            if h <= inst.delta:
                chosen, h_chosen = ell, h
                break
        if chosen is None:
            points.append(
                RatePoint(xi, inst.delta, None, None, None, None, feasible=False)
            )
            continue
        strategy = ParamStrategy(variant="a-known", c=c)
        reg_cfg = RegularizationConfig(
            ell=chosen, iterations=iterations, strategy=strategy, power=power
        )
        prep = finish_subspace(
            inst.op,
            inst.y_delta,
            reg_cfg,
            "igkt",
            decomp.prefix(chosen),
            h_ell=h_chosen,
        )
        report = solve_on_subspace(
            prep, iterations, strategy, inst.delta, x_dagger=inst.x_dagger
        )
        points.append(
            RatePoint(
                xi=xi,
                delta=inst.delta,
                ell=chosen,
                h_ell=h_chosen,
                alpha=report.alpha,
                rel_error=report.rel_error,
                feasible=report.feasible,
            )
        )
    usable = [p for p in points if p.feasible and p.rel_error and p.rel_error > 0.0]
    slope = None
    if len(usable) >= 3:
        slope = fit_loglog_slope(
            [p.delta for p in usable], [p.rel_error for p in usable]
        )
    return RateStudyResult(points=points, slope=slope)


def render_rate_csv(points: Sequence[RatePoint]) -> str:
    return render_csv(
        RATE_HEADER,
        [
            (p.xi, p.delta, p.ell, p.h_ell, p.alpha, p.rel_error, p.feasible)
            for p in points
        ],
    )


# ---------------------------------------------------------------------------
# subspace diagnostics sweep


@dataclass(frozen=True)
class DiagRow:
    ell: int
    igkt_gap: Optional[float]
    igkt_gamma: Optional[float]
    igkt_h_rel: Optional[float]
    iat_gap: Optional[float]
    iat_gamma: Optional[float]
    iat_h_rel: Optional[float]


def diagnostics_sweep(
    problem: TestProblem,
    ells: Sequence[int],
    include_iat: bool = True,
    max_iters: int = 200,
    rel_tol: float = 1e-8,
    rank_tol: float = 1e-12,
) -> List[DiagRow]:
    """Assumption gap, projector defect norm and h_ell across dimensions.

    The Arnoldi columns require a square operator and are skipped (left
    empty) otherwise; values are reported raw since none of them is
    guaranteed monotone in ``ell``.
    """
    ells = sorted(set(int(e) for e in ells))
    op_norm = spectral_norm_estimate(
        problem.op,
        max_iters=max_iters,
        rel_tol=rel_tol,
        seed=derive_seed(problem.seed, "op-norm"),
    )
    per_method = {}
    methods = ["igkt"] + (["iat"] if include_iat and problem.op.is_square else [])
    for method in methods:
        full = _decompose(problem, method, min(max(ells), min(problem.op.shape)))
        reports = {}
        for ell in ells:
            if ell > full.ell_eff:
                continue
            reports[ell] = assumption_diagnostics(
                problem.op,
                full.prefix(ell),
                problem.x_dagger,
                max_iters=max_iters,
                rel_tol=rel_tol,
                seed=derive_seed(problem.seed, ("diag", method, ell)),
                rank_tol=rank_tol,
                op_norm=op_norm,
            )
        per_method[method] = reports

    rows = []
    for ell in ells:
        g = per_method.get("igkt", {}).get(ell)
        a = per_method.get("iat", {}).get(ell)
        rows.append(
            DiagRow(
                ell=ell,
                igkt_gap=g.assumption_gap if g else None,
                igkt_gamma=g.gamma_ell if g else None,
                igkt_h_rel=g.h_ell_rel if g else None,
                iat_gap=a.assumption_gap if a else None,
                iat_gamma=a.gamma_ell if a else None,
                iat_h_rel=a.h_ell_rel if a else None,
            )
        )
    return rows


def render_diag_csv(rows: Sequence[DiagRow]) -> str:
    return render_csv(
        DIAG_HEADER,
        [
            (
                r.ell,
                r.igkt_gap,
                r.igkt_gamma,
                r.igkt_h_rel,
                r.iat_gap,
                r.iat_gamma,
                r.iat_h_rel,
            )
            for r in rows
        ],
    )
