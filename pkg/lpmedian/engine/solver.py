"""
Weighted lp medians and geometric quantiles.

Both problems minimize

    f(xi) = sum_i w_i * (||X_i - xi||_p + <u, X_i - xi>)

(u = 0 gives the median). For p = 2 the iteration starts as Weiszfeld's, with the
Vardi-Zhang modification at data points, and in k >= 2 turns to Newton steps
when its gradient stops shrinking by at least 10% per step; for other p it is a damped Newton
method on psi_dot with an Armijo backtracking line search and a gradient
step fallback. At every iterate the nearest data point is tested with the
subgradient certificate

    || sum_{X_i != X_j} w_i psi(X_i, X_j) - u ||_q <= (mass at X_j),

which settles minimizers that sit on an observation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from lpmedian.engine.errors import (
    DegenerateGeometryError,
    InvalidInputError,
    NonConvergenceError,
    SingularityError,
)
from lpmedian.engine.lp_core import (
    NormSpec,
    _norms,
    as_direction,
    psi_dot_sum,
    score_rows,
)

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12
ROUNDING_ULPS = 4.0
# Per-step gradient ratio above which a tiny objective change counts as a stall.
STALL_RATE = 0.9


@dataclass(frozen=True, slots=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 500
    objective_rtol: float = 1e-12
    # A stalled objective (relative change <= objective_rtol for stall_iter
    # consecutive steps) only counts as converged below this gradient norm.
    stall_tol: float = 1e-6
    stall_iter: int = 5
    coincidence_tol: float = 1e-12
    armijo_c: float = 1e-4
    max_condition: float = 1e12
    min_step: float = 1e-12
    # Scales the first trial step of each line search; retries use < 1.
    damping: float = 1.0
    start: np.ndarray | None = None


@dataclass(slots=True)
class SolveReport:
    """Outcome of one solve.

    ``gradient_norm`` is at most ``tol`` after a "gradient" stop; an
    "objective" stop accepts up to ``stall_tol``.
    """

    minimizer: np.ndarray
    objective: float
    gradient_norm: float
    iterations: int
    converged: bool
    coincident_row: int | None = None
    stopping: str = ""

    def as_dict(self) -> dict:
        return {
            "minimizer": self.minimizer.tolist(),
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "coincident_row": self.coincident_row,
            "stopping": self.stopping,
        }


# --- validation ---


def as_data(data) -> np.ndarray:
    """Coerce to an n x k finite float matrix (a 1-D input is one column)."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError("data must be an n x k matrix with n, k >= 1")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("data has non-finite entries")
    return arr


def as_weights(w, n: int) -> np.ndarray:
    arr = np.asarray(w, dtype=float)
    if arr.shape != (n,):
        raise InvalidInputError(f"weights must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidInputError("weights must be finite and nonnegative")
    if abs(arr.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise InvalidInputError(f"weights sum to {arr.sum()!r}, expected 1")
    return arr


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def check_geometry(data: np.ndarray) -> None:
    """Reject k >= 2 data lying on one straight line (identical rows pass)."""
    if data.shape[1] < 2 or data.shape[0] < 2:
        return
    rank = np.linalg.matrix_rank(data - data.mean(axis=0))
    if rank == 1:
        raise DegenerateGeometryError(
            "observations are collinear; the median is not unique",
            details={"rank": int(rank)},
        )


# --- objective pieces ---


def coordinatewise_quantile(data: np.ndarray, w: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Weighted quantile of each coordinate: smallest value with cdf >= level."""
    out = np.empty(data.shape[1])
    for j in range(data.shape[1]):
        order = np.argsort(data[:, j], kind="stable")
        cum = np.cumsum(w[order])
        idx = min(int(np.searchsorted(cum, levels[j] - 1e-15)), len(order) - 1)
        out[j] = data[order[idx], j]
    return out


def coordinatewise_median(data: np.ndarray, w: np.ndarray) -> np.ndarray:
    return coordinatewise_quantile(data, w, np.full(data.shape[1], 0.5))


def _objective(data: np.ndarray, w: np.ndarray, u: np.ndarray, xi: np.ndarray, spec: NormSpec) -> float:
    d = data - xi
    return float(w @ (_norms(d, spec.p) + d @ u))


def objective(data, w, u, xi, spec: NormSpec) -> float:
    """sum_i w_i Phi_p(u, X_i - xi)."""
    x = as_data(data)
    weights = as_weights(w, x.shape[0])
    u_arr = as_direction(u, spec, x.shape[1])
    xi_arr = np.asarray(xi, dtype=float)
    if xi_arr.shape != (x.shape[1],) or not np.all(np.isfinite(xi_arr)):
        raise InvalidInputError("xi must be a finite k-vector")
    return _objective(x, weights, u_arr, xi_arr, spec)


@dataclass(slots=True)
class _Local:
    """Gradient of the smooth part at xi plus the mass sitting on xi."""

    gradient: np.ndarray
    distances: np.ndarray
    coincident: np.ndarray
    mass: float
    gradient_norm: float


def _local(data, w, u, xi, spec, opts) -> _Local:
    scores, r, coincident = score_rows(data, xi, spec, opts.coincidence_tol)
    g = w @ scores - u
    return _Local(
        gradient=g,
        distances=r,
        coincident=coincident,
        mass=float(w[coincident].sum()),
        gradient_norm=float(_norms(g, spec.q)),
    )


def _certified(loc: _Local, opts: SolverOptions) -> bool:
    return loc.mass > 0.0 and loc.gradient_norm <= loc.mass + opts.tol


def _escape(data, w, u, xi, f, loc: _Local, spec, opts):
    """Leave a non-optimal data point along the dual map of -g."""
    step = -np.sign(loc.gradient) * np.power(np.abs(loc.gradient), spec.q - 1.0)
    slope = -float(np.sum(np.abs(loc.gradient) ** spec.q)) + loc.mass * float(_norms(step, spec.p))
    return _line_search(data, w, u, xi, f, step, slope, spec, opts)


def _noise(f: float) -> float:
    """Objective differences below this are rounding."""
    return ROUNDING_ULPS * float(np.spacing(max(abs(f), 1.0)))


def _line_search(data, w, u, xi, f, step, slope, spec, opts):
    """Armijo backtracking with halving along ``step``; None when it fails.

    A predicted decrease below rounding level accepts any step that does not
    raise the objective beyond rounding.
    """
    if not slope < 0.0:
        return None
    noise = _noise(f)
    a = opts.damping
    while a >= opts.min_step:
        cand = xi + a * step
        f_new = _objective(data, w, u, cand, spec)
        if f_new <= f + opts.armijo_c * a * slope:
            return cand, f_new
        if -opts.armijo_c * a * slope < noise and f_new <= f + noise:
            return cand, f_new
        a *= 0.5
    return None


def _weiszfeld(data, w, u, xi, f, loc: _Local, spec, opts):
    """Vardi-Zhang modified Weiszfeld map for p = 2."""
    free = ~loc.coincident
    inv = w[free] / loc.distances[free]
    total = inv.sum()
    if total <= 0.0:
        return None
    target = (inv @ data[free] + u) / total
    if loc.mass > 0.0:
        # ||R|| = ||target - xi|| * total = ||g||
        ratio = loc.mass / float(np.linalg.norm(loc.gradient))
        target = max(0.0, 1.0 - ratio) * target + min(1.0, ratio) * xi
    f_new = _objective(data, w, u, target, spec)
    if f_new <= f + _noise(f):
        return target, f_new
    return _newton(data, w, u, xi, f, loc, spec, opts)


def _newton(data, w, u, xi, f, loc: _Local, spec, opts):
    free = ~loc.coincident
    g = loc.gradient
    try:
        hess = psi_dot_sum(data, xi, spec, w, free)
        eig = np.linalg.eigvalsh(hess)
        ill = not eig[0] > 0 or eig[-1] / eig[0] > opts.max_condition
    except (SingularityError, np.linalg.LinAlgError):
        ill = True
    if not ill:
        step = -np.linalg.solve(hess, g)
        found = _line_search(data, w, u, xi, f, step, float(g @ step), spec, opts)
        if found is not None:
            return found
    logger.debug("newton step rejected at %s; taking a gradient step", xi)
    lipschitz = float(np.sum(w[free] * max(spec.p - 1.0, 1.0) / loc.distances[free]))
    step = -g / lipschitz if lipschitz > 0 else -g
    return _line_search(data, w, u, xi, f, step, float(g @ step), spec, opts)


def _minimize(data: np.ndarray, w: np.ndarray, u: np.ndarray, spec: NormSpec, opts: SolverOptions) -> SolveReport:
    if opts.start is None:
        xi = coordinatewise_quantile(data, w, (1.0 + u) / 2.0)
    else:
        xi = np.array(opts.start, dtype=float)
    f = _objective(data, w, u, xi, spec)
    best = SolveReport(xi.copy(), f, np.inf, 0, False)
    stalled = 0
    small_change = False
    previous_gradient = np.inf
    newton_phase = False

    for it in range(1, opts.max_iter + 1):
        loc = _local(data, w, u, xi, spec, opts)
        if loc.mass == 0.0 and loc.gradient_norm <= opts.tol:
            return SolveReport(xi, f, loc.gradient_norm, it, True, None, "gradient")

        # Stalled: the objective and the gradient have both stopped moving.
        slow = loc.gradient_norm > STALL_RATE * previous_gradient
        crawling = small_change and slow
        stalled = stalled + 1 if crawling else 0
        previous_gradient = loc.gradient_norm
        if stalled >= opts.stall_iter and loc.mass == 0.0 and loc.gradient_norm <= opts.stall_tol:
            return SolveReport(xi, f, loc.gradient_norm, it, True, None, "objective")

        # Certify the nearest observation as the minimizer.
        j = int(np.argmin(loc.distances))
        at = _local(data, w, u, data[j], spec, opts)
        if _certified(at, opts):
            point = data[j].copy()
            f_point = _objective(data, w, u, point, spec)
            return SolveReport(point, f_point, at.gradient_norm, it, True, j, "subgradient")

        if f < best.objective or best.iterations == 0:
            best = SolveReport(xi.copy(), f, loc.gradient_norm, it, False)

        # p = 2 leaves Weiszfeld for Newton once the gradient stops shrinking.
        newton_phase = newton_phase or (slow and loc.mass == 0.0 and data.shape[1] > 1)
        if spec.p == 2.0 and (loc.mass > 0.0 or not newton_phase):
            found = _weiszfeld(data, w, u, xi, f, loc, spec, opts)
        elif loc.mass > 0.0:
            found = _escape(data, w, u, xi, f, loc, spec, opts)
        else:
            found = _newton(data, w, u, xi, f, loc, spec, opts)

        if found is None:
            if loc.mass == 0.0 and loc.gradient_norm <= opts.stall_tol:
                return SolveReport(xi, f, loc.gradient_norm, it, True, None, "objective")
            break
        xi_new, f_new = found
        small_change = abs(f - f_new) <= opts.objective_rtol * max(1.0, abs(f_new))
        xi, f = xi_new, f_new

    if f < best.objective:
        loc = _local(data, w, u, xi, spec, opts)
        best = SolveReport(xi.copy(), f, loc.gradient_norm, opts.max_iter, False)
    logger.warning("solver did not converge (p=%s, gradient norm %.3g)", spec.p, best.gradient_norm)
    raise NonConvergenceError(
        f"no convergence within {opts.max_iter} iterations", report=best
    )


def solve(data: np.ndarray, w: np.ndarray, u: np.ndarray, spec: NormSpec, opts: SolverOptions) -> SolveReport:
    """Minimize without re-validating; callers have checked the inputs."""
    return _minimize(data, w, u, spec, opts)


def weighted_median(data, w, spec: NormSpec, opts: SolverOptions | None = None) -> SolveReport:
    """argmin_theta sum_i w_i ||X_i - theta||_p."""
    x = as_data(data)
    weights = as_weights(w, x.shape[0])
    check_geometry(x)
    return _minimize(x, weights, np.zeros(x.shape[1]), spec, opts or SolverOptions())


def geometric_quantile(data, w, u, spec: NormSpec, opts: SolverOptions | None = None) -> SolveReport:
    """argmin_xi sum_i w_i Phi_p(u, X_i - xi)."""
    x = as_data(data)
    weights = as_weights(w, x.shape[0])
    u_arr = as_direction(u, spec, x.shape[1])
    check_geometry(x)
    return _minimize(x, weights, u_arr, spec, opts or SolverOptions())


def retry_options(opts: SolverOptions) -> SolverOptions:
    """Options for a second attempt: half damping, default start."""
    return replace(opts, damping=opts.damping * 0.5, start=None)
