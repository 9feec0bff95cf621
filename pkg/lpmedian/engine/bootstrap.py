"""
Bayesian-bootstrap posterior sampling for medians and joint quantiles.

A posterior draw reweights the observations with Dirichlet(1, ..., 1)
weights, built as normalized standard exponentials, and solves every
requested quantile direction with that one weight vector. Each draw owns a
counter-based random stream (Philox keyed by the master seed and the draw
index), so the stored matrix does not depend on execution order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from lpmedian.engine.errors import (
    GeomedError,
    InvalidInputError,
    SamplerDegeneracyError,
)
from lpmedian.engine.lp_core import NormSpec, as_direction
from lpmedian.engine.solver import (
    SolverOptions,
    as_data,
    check_geometry,
    retry_options,
    solve,
    uniform_weights,
)

logger = logging.getLogger(__name__)

MAX_DROPPED_FRACTION = 0.01


@dataclass(frozen=True, slots=True)
class RngSeed:
    """A master seed plus a spawn path; each path is an independent stream."""

    master: int
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.master) < 2**64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.master}")

    @property
    def stream(self) -> int:
        return self.path[-1] if self.path else 0

    def child(self, index: int) -> RngSeed:
        return RngSeed(self.master, (*self.path, int(index)))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master), spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


@dataclass(slots=True)
class PosteriorDraws:
    """N x (m*k) posterior draws; columns l*k:(l+1)*k belong to direction l."""

    draws: np.ndarray
    directions: np.ndarray
    estimates: np.ndarray
    n_data: int
    spec: NormSpec
    seed: RngSeed
    requested: int
    dropped: int = 0
    alpha: tuple[int, ...] | None = None
    draw_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def k(self) -> int:
        return self.directions.shape[1]

    @property
    def m(self) -> int:
        return self.directions.shape[0]

    def block(self, index: int = 0) -> np.ndarray:
        k = self.k
        return self.draws[:, index * k : (index + 1) * k]

    def centered(self, scale: float | None = None) -> np.ndarray:
        """sqrt(n) * (draw - estimate), or ``scale`` in place of sqrt(n)."""
        factor = np.sqrt(self.n_data) if scale is None else scale
        return factor * (self.draws - self.estimates.reshape(-1))


def dirichlet_weights(n: int, seed: RngSeed) -> np.ndarray:
    """Dirichlet(1, ..., 1) weights: Y_i / sum_j Y_j with Y_i ~ Exp(1)."""
    if int(n) < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    y = seed.generator().standard_exponential(int(n))
    return y / y.sum()


def as_directions(directions, spec: NormSpec, k: int) -> np.ndarray:
    """m x k array of validated directions; None means the median only."""
    if directions is None:
        return np.zeros((1, k))
    arr = np.asarray(directions, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise InvalidInputError("directions must be an m x k array with m >= 1")
    return np.vstack([as_direction(u, spec, k) for u in arr])


def empirical_estimates(data, directions, spec: NormSpec, opts: SolverOptions | None = None) -> np.ndarray:
    """Uniform-weight quantiles, one row per direction."""
    x = as_data(data)
    dirs = as_directions(directions, spec, x.shape[1])
    check_geometry(x)
    opts = opts or SolverOptions()
    w = uniform_weights(x.shape[0])
    return np.vstack([solve(x, w, u, spec, opts).minimizer for u in dirs])


def _one_draw(data, directions, estimates, spec, seed, opts) -> np.ndarray | None:
    w = dirichlet_weights(data.shape[0], seed)
    out = []
    for u, start in zip(directions, estimates):
        warm = replace(opts, start=start)
        try:
            report = solve(data, w, u, spec, warm)
        except GeomedError:
            try:
                report = solve(data, w, u, spec, retry_options(warm))
            except GeomedError as exc:
                logger.warning("dropping posterior draw %s: %s", seed.path, exc)
                return None
        out.append(report.minimizer)
    return np.concatenate(out)


def posterior_sample(
    data,
    directions,
    spec: NormSpec,
    n_draws: int,
    seed: RngSeed,
    opts: SolverOptions | None = None,
    *,
    workers: int = 1,
    estimates: np.ndarray | None = None,
) -> PosteriorDraws:
    """
    Joint Bayesian-bootstrap draws of the quantiles at ``directions``.

    Draw t uses the stream ``seed.child(t)``; each solve is warm-started at
    the empirical estimate for its direction. A draw that fails twice is
    dropped; more than 1% dropped raises SamplerDegeneracyError.
    """
    x = as_data(data)
    dirs = as_directions(directions, spec, x.shape[1])
    if int(n_draws) < 1:
        raise InvalidInputError(f"number of draws must be >= 1, got {n_draws}")
    opts = opts or SolverOptions()
    if estimates is None:
        estimates = empirical_estimates(x, dirs, spec, opts)
    else:
        check_geometry(x)
        estimates = np.asarray(estimates, dtype=float).reshape(dirs.shape)

    def run(t: int):
        return _one_draw(x, dirs, estimates, spec, seed.child(t), opts)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(n_draws)))
    else:
        results = [run(t) for t in range(n_draws)]

    kept = [t for t, r in enumerate(results) if r is not None]
    dropped = n_draws - len(kept)
    if dropped > MAX_DROPPED_FRACTION * n_draws:
        raise SamplerDegeneracyError(
            f"{dropped} of {n_draws} posterior draws failed to solve",
            details={"dropped": dropped, "requested": n_draws},
        )
    if not kept:
        raise SamplerDegeneracyError("no posterior draw could be solved")
    return PosteriorDraws(
        draws=np.vstack([results[t] for t in kept]),
        directions=dirs,
        estimates=estimates,
        n_data=x.shape[0],
        spec=spec,
        seed=seed,
        requested=n_draws,
        dropped=dropped,
        draw_ids=np.asarray(kept, dtype=int),
    )
