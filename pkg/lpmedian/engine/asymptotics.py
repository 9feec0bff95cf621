"""
Plug-in sandwich covariances.

For the median, Psi_dot and Sigma are replaced by their empirical means at
the estimate:

    Psi_hat   = (1/n') sum_i psi_dot(X_i, theta_hat)
    Sigma_hat = (1/n') sum_i psi(X_i, theta_hat) psi(X_i, theta_hat)^T
    cov       = Psi_hat^{-1} Sigma_hat Psi_hat^{-1}

over the n' rows not coincident with the estimate. The quantile version
builds the (j, l) block from the estimating functions of directions u_j
and u_l. cov is the covariance of the sqrt(n)-scaled estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lpmedian.engine.errors import (
    InsufficientDataError,
    InvalidInputError,
    UnstableEstimateError,
)
from lpmedian.engine.lp_core import NormSpec, psi_dot_sum, score_rows
from lpmedian.engine.solver import as_data

COINCIDENCE_TOL = 1e-12
MAX_CONDITION = 1e12
CONVENTIONS = ("exclude", "zero")


@dataclass(frozen=True, slots=True)
class SandwichEstimate:
    psi_dot_hat: np.ndarray
    sigma_hat: np.ndarray
    cov: np.ndarray
    center: np.ndarray
    n_used: int
    n_rows: int

    @property
    def n_excluded(self) -> int:
        return self.n_rows - self.n_used

    @property
    def per_observation_cov(self) -> np.ndarray:
        """Covariance of the unscaled estimator, cov / n."""
        return self.cov / self.n_rows

    def as_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "psi_dot_hat": self.psi_dot_hat.tolist(),
            "sigma_hat": self.sigma_hat.tolist(),
            "cov": self.cov.tolist(),
            "n_used": self.n_used,
            "n_rows": self.n_rows,
        }


@dataclass(frozen=True, slots=True)
class QuantileCovariance:
    directions: np.ndarray
    blocks: np.ndarray  # m x m x k x k

    def block(self, j: int, l: int) -> np.ndarray:
        return self.blocks[j, l]

    def full(self) -> np.ndarray:
        m, _, k, _ = self.blocks.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(m * k, m * k)


@dataclass(slots=True)
class _Plugin:
    """Per-estimate pieces: estimating scores, usable rows, inverse Psi_hat."""

    scores: np.ndarray
    mask: np.ndarray
    psi_dot_hat: np.ndarray
    psi_dot_inv: np.ndarray
    divisor: int


def _plugin(x: np.ndarray, center: np.ndarray, u: np.ndarray, spec: NormSpec, convention: str) -> _Plugin:
    """Plug-in pieces at ``center`` for direction ``u``.

    The estimating function is psi(X_i, xi) - u with psi = -sign(d)|d/r|^(p-1),
    the gradient of the quantile objective; it sums to zero at the quantile.
    """
    n, k = x.shape
    scores, _, coincident = score_rows(x, center, spec, COINCIDENCE_TOL)
    mask = ~coincident
    n_used = int(mask.sum())
    if n_used < k + 1:
        raise InsufficientDataError(
            f"only {n_used} rows differ from the estimate; need at least {k + 1}"
        )
    divisor = n_used if convention == "exclude" else n
    scores = scores - u if np.any(u) else scores
    if convention == "zero":
        scores[coincident] = 0.0
    psi_hat = psi_dot_sum(x, center, spec, np.ones(n), mask) / divisor
    if np.linalg.cond(psi_hat) > MAX_CONDITION:
        raise UnstableEstimateError(
            "plug-in derivative matrix is singular",
            details={"psi_dot_hat": psi_hat.tolist()},
        )
    return _Plugin(scores, mask, psi_hat, np.linalg.inv(psi_hat), divisor)


def _mean_outer(a: _Plugin, b: _Plugin, convention: str) -> np.ndarray:
    if convention == "zero":
        return (a.scores.T @ b.scores) / a.divisor
    mask = a.mask & b.mask
    return (a.scores[mask].T @ b.scores[mask]) / int(mask.sum())


def _sandwich_block(a: _Plugin, b: _Plugin, sigma: np.ndarray, symmetric: bool) -> np.ndarray:
    cov = a.psi_dot_inv @ sigma @ b.psi_dot_inv.T
    return 0.5 * (cov + cov.T) if symmetric else cov


def _convention(value: str) -> str:
    if value not in CONVENTIONS:
        raise InvalidInputError(f"coincident convention must be one of {CONVENTIONS}, got {value!r}")
    return value


def sandwich(data, theta_hat, spec: NormSpec, *, coincident: str = "exclude") -> SandwichEstimate:
    """Plug-in Psi^{-1} Sigma Psi^{-1} at a converged median."""
    x = as_data(data)
    center = np.asarray(theta_hat, dtype=float).reshape(x.shape[1])
    convention = _convention(coincident)
    piece = _plugin(x, center, np.zeros(x.shape[1]), spec, convention)
    sigma = _mean_outer(piece, piece, convention)
    return SandwichEstimate(
        psi_dot_hat=piece.psi_dot_hat,
        sigma_hat=sigma,
        cov=_sandwich_block(piece, piece, sigma, True),
        center=center,
        n_used=int(piece.mask.sum()),
        n_rows=x.shape[0],
    )


def quantile_sandwich(data, estimates, directions, spec: NormSpec, *, coincident: str = "exclude") -> QuantileCovariance:
    """Joint covariance blocks of the quantiles at ``directions``."""
    x = as_data(data)
    k = x.shape[1]
    dirs = np.asarray(directions, dtype=float).reshape(-1, k)
    centers = np.asarray(estimates, dtype=float).reshape(-1, k)
    if dirs.shape[0] != centers.shape[0]:
        raise InvalidInputError("need one estimate per direction")
    convention = _convention(coincident)
    pieces = [_plugin(x, c, u, spec, convention) for c, u in zip(centers, dirs)]
    m = len(pieces)
    blocks = np.empty((m, m, k, k))
    for j in range(m):
        for l in range(j, m):
            sigma = _mean_outer(pieces[j], pieces[l], convention)
            blocks[j, l] = _sandwich_block(pieces[j], pieces[l], sigma, j == l)
            blocks[l, j] = blocks[j, l].T
    return QuantileCovariance(directions=dirs, blocks=blocks)


def frobenius_relative_error(estimate: np.ndarray, reference: np.ndarray) -> float:
    """||estimate - reference||_F / ||reference||_F."""
    return float(np.linalg.norm(estimate - reference) / np.linalg.norm(reference))
