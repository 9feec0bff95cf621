"""
Transformation-retransformation (TR) affine-equivariant median.

A subset alpha = (i0, i1, ..., ik) of k+1 rows defines
X(alpha) = [X_i1 - X_i0, ..., X_ik - X_i0]. The rows outside alpha are
mapped to Z_j = X(alpha)^{-1} X_j, their lp median phi is computed, and the
estimate is X(alpha) phi. alpha is chosen to make X(alpha)^T S^{-1} X(alpha)
as close to a multiple of the identity as possible (S the sample
covariance), measured by the arithmetic/geometric mean ratio of its
eigenvalues.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from lpmedian.engine.asymptotics import SandwichEstimate, sandwich
from lpmedian.engine.bootstrap import PosteriorDraws, RngSeed, posterior_sample
from lpmedian.engine.errors import (
    DegenerateDataError,
    InsufficientDataError,
    InvalidInputError,
)
from lpmedian.engine.lp_core import NormSpec
from lpmedian.engine.solver import (
    SolverOptions,
    as_data,
    uniform_weights,
    weighted_median,
)

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
DEFAULT_CANDIDATES = 500
# Criteria this close count as tied.
TIE_RTOL = 1e-12


@dataclass(frozen=True, slots=True)
class AlphaSubset:
    indices: tuple[int, ...]
    transform: np.ndarray
    criterion: float

    def complement(self, n: int) -> np.ndarray:
        mask = np.ones(n, dtype=bool)
        mask[list(self.indices)] = False
        return np.flatnonzero(mask)


def _inverse_covariance(data: np.ndarray) -> np.ndarray:
    cov = np.cov(data, rowvar=False, ddof=1).reshape(data.shape[1], data.shape[1])
    if np.linalg.cond(cov) > MAX_CONDITION:
        raise DegenerateDataError("sample covariance is singular")
    return np.linalg.inv(cov)


def _transforms(data: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """Stack of X(alpha) for each row of ``subsets`` (c x (k+1) indices)."""
    base = data[subsets[:, 0]]
    return np.transpose(data[subsets[:, 1:]] - base[:, None, :], (0, 2, 1))


def _criteria(transforms: np.ndarray, sigma_inv: np.ndarray) -> np.ndarray:
    """AM/GM eigenvalue ratio of X^T S^{-1} X per candidate; inf if singular."""
    gram = np.transpose(transforms, (0, 2, 1)) @ sigma_inv @ transforms
    gram = 0.5 * (gram + np.transpose(gram, (0, 2, 1)))
    eig = np.linalg.eigvalsh(gram)
    out = np.full(len(transforms), np.inf)
    ok = eig[:, 0] > 0
    if np.any(ok):
        # An invertible X(alpha) gives cond(X^T S^-1 X) ~ cond(X)^2.
        ok &= eig[:, -1] / np.where(ok, eig[:, 0], 1.0) < MAX_CONDITION**2
    e = eig[ok]
    out[ok] = e.mean(axis=1) / np.exp(np.log(e).mean(axis=1))
    return out


def alpha_criterion(data, indices, sigma_inv: np.ndarray | None = None) -> float:
    """AM/GM criterion of one ordered subset."""
    x = as_data(data)
    if sigma_inv is None:
        sigma_inv = _inverse_covariance(x)
    subset = np.asarray([indices], dtype=int)
    return float(_criteria(_transforms(x, subset), sigma_inv)[0])


def build_alpha(data, indices, sigma_inv: np.ndarray | None = None) -> AlphaSubset:
    """AlphaSubset for explicit indices (i0 first)."""
    x = as_data(data)
    k = x.shape[1]
    idx = tuple(int(i) for i in indices)
    if len(idx) != k + 1 or len(set(idx)) != k + 1:
        raise InvalidInputError(f"alpha needs {k + 1} distinct row indices, got {idx}")
    if min(idx) < 0 or max(idx) >= x.shape[0]:
        raise InvalidInputError(f"alpha indices {idx} out of range for {x.shape[0]} rows")
    transform = _transforms(x, np.asarray([idx]))[0]
    if np.linalg.cond(transform) >= MAX_CONDITION:
        raise DegenerateDataError(f"X(alpha) is singular for alpha={idx}")
    if sigma_inv is None and x.shape[0] > k + 1:
        criterion = alpha_criterion(x, idx)
    elif sigma_inv is not None:
        criterion = alpha_criterion(x, idx, sigma_inv)
    else:
        criterion = math.nan
    return AlphaSubset(idx, transform, criterion)


def select_alpha(data, n_candidates: int = DEFAULT_CANDIDATES, seed: RngSeed | None = None) -> AlphaSubset:
    """
    Subset minimizing the AM/GM criterion.

    Exhaustive over sorted (k+1)-subsets when there are at most
    ``n_candidates`` of them, otherwise over ``n_candidates`` random sorted
    subsets. Criteria within a relative TIE_RTOL of the minimum are ties,
    resolved to the lexicographically smallest index tuple.
    """
    x = as_data(data)
    n, k = x.shape
    if n <= k + 1:
        raise InsufficientDataError(f"alpha selection needs n > k+1, got n={n}, k={k}")
    sigma_inv = _inverse_covariance(x)

    if math.comb(n, k + 1) <= n_candidates:
        subsets = np.array(list(itertools.combinations(range(n), k + 1)), dtype=int)
    else:
        gen = (seed or RngSeed(0)).generator()
        subsets = np.sort(
            np.array([gen.choice(n, size=k + 1, replace=False) for _ in range(n_candidates)]),
            axis=1,
        )
    crit = _criteria(_transforms(x, subsets), sigma_inv)
    finite = np.isfinite(crit)
    logger.debug("alpha search: %d candidates, %d singular", len(subsets), int((~finite).sum()))
    if not np.any(finite):
        raise DegenerateDataError("every alpha candidate is singular")

    tied = np.flatnonzero(crit <= crit[finite].min() * (1.0 + TIE_RTOL))
    best = subsets[tied[np.lexsort(subsets[tied].T[::-1])[0]]]
    return build_alpha(x, best, sigma_inv)


def transform_data(data, alpha: AlphaSubset) -> np.ndarray:
    """Z_j = X(alpha)^{-1} X_j for the rows j outside alpha."""
    x = as_data(data)
    rest = alpha.complement(x.shape[0])
    return np.linalg.solve(alpha.transform, x[rest].T).T


def _z_data(data, alpha: AlphaSubset) -> np.ndarray:
    z = transform_data(data, alpha)
    if z.shape[0] < 2:
        raise InsufficientDataError(
            f"only {z.shape[0]} rows remain outside alpha; need at least 2"
        )
    return z


def tr_median(data, alpha: AlphaSubset, spec: NormSpec, opts: SolverOptions | None = None) -> np.ndarray:
    """X(alpha) times the lp median of the transformed rows."""
    z = _z_data(data, alpha)
    phi = weighted_median(z, uniform_weights(z.shape[0]), spec, opts).minimizer
    return alpha.transform @ phi


def tr_posterior_sample(
    data,
    alpha: AlphaSubset,
    spec: NormSpec,
    n_draws: int,
    seed: RngSeed,
    opts: SolverOptions | None = None,
    *,
    workers: int = 1,
) -> PosteriorDraws:
    """Bayesian-bootstrap draws over the Z rows, mapped back by X(alpha)."""
    z = _z_data(data, alpha)
    inner = posterior_sample(z, None, spec, n_draws, seed, opts, workers=workers)
    t = alpha.transform
    inner.draws = inner.draws @ t.T
    inner.estimates = inner.estimates @ t.T
    inner.alpha = alpha.indices
    return inner


def tr_sandwich(data, alpha: AlphaSubset, spec: NormSpec, opts: SolverOptions | None = None) -> SandwichEstimate:
    """
    Limit covariance of the TR median: X(alpha) cov_Z X(alpha)^T.

    cov_Z is the plug-in sandwich of the Z rows at their median; the result
    is scaled for sqrt(n - k - 1) like the draws of ``tr_posterior_sample``.
    """
    z = _z_data(data, alpha)
    phi = weighted_median(z, uniform_weights(z.shape[0]), spec, opts).minimizer
    inner = sandwich(z, phi, spec)
    t = alpha.transform
    return replace(inner, cov=t @ inner.cov @ t.T, center=t @ phi)
