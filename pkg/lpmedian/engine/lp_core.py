"""
lp geometry: norms, the quantile objective, the Z-estimator score and its
derivative.

All functions are pure. Single-point operations (``score_psi``, ``psi_dot``,
...) validate their inputs and raise; the row-wise helpers (``score_rows``,
``psi_dot_sum``) are the vectorized forms used by the solver and the plug-in
covariance code and report coincident rows through a mask instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from lpmedian.engine.errors import (
    CoincidentPointError,
    DirectionDomainError,
    InvalidInputError,
    SingularityError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class NormSpec:
    """Exponent p of the lp norm, optionally tied to a dimension k.

    ``in_theory_domain`` is False when k >= 3 and p is not an integer >= 2:
    the asymptotic results only cover that range for k >= 3. Computation is
    still allowed.
    """

    p: float
    k: int | None = None
    in_theory_domain: bool = field(init=False, default=True)

    def __post_init__(self) -> None:
        try:
            p = float(self.p)
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"p must be a real number, got {self.p!r}") from exc
        if not math.isfinite(p) or p <= 1.0:
            raise InvalidInputError(f"p must be finite and > 1, got {p}")
        object.__setattr__(self, "p", p)
        if self.k is not None and self.k >= 3 and not (self.is_integer and p >= 2):
            object.__setattr__(self, "in_theory_domain", False)
            logger.warning(
                "p=%s with k=%s is outside the theory domain (integer p >= 2 for k >= 3)",
                p,
                self.k,
            )

    @property
    def q(self) -> float:
        """Conjugate exponent, 1/p + 1/q = 1."""
        return self.p / (self.p - 1.0)

    @property
    def is_integer(self) -> bool:
        return float(self.p).is_integer()

    def dual(self) -> NormSpec:
        return NormSpec(self.q)


def _power(a: np.ndarray, e: float) -> np.ndarray:
    """a**e elementwise; nonnegative integer e uses exact repeated squaring."""
    if float(e).is_integer() and e >= 0:
        n = int(e)
        result = np.ones_like(a, dtype=float)
        base = np.asarray(a, dtype=float)
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result
    return np.power(a, e)


def _norms(v: np.ndarray, exponent: float) -> np.ndarray:
    """lp norms along the last axis, scaled by the max component."""
    a = np.abs(v)
    m = a.max(axis=-1, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    scaled = a / safe
    if exponent == 2.0:
        s = np.sqrt(np.sum(scaled * scaled, axis=-1))
    else:
        s = np.sum(_power(scaled, exponent), axis=-1) ** (1.0 / exponent)
    return m[..., 0] * s


def as_vector(v, name: str = "vector", k: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-D float array, optionally of length k."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-D vector")
    if k is not None and arr.size != k:
        raise InvalidInputError(f"{name} has length {arr.size}, expected {k}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite components")
    return arr


def lp_norm(v, spec: NormSpec) -> float:
    """(sum_j |v_j|^p)^(1/p)."""
    arr = as_vector(v, "v")
    return float(_norms(arr, spec.p))


def dual_norm(v, spec: NormSpec) -> float:
    """q-norm of v, q conjugate to spec.p."""
    arr = as_vector(v, "v")
    return float(_norms(arr, spec.q))


def as_direction(u, spec: NormSpec, k: int | None = None) -> np.ndarray:
    """Validate a quantile direction: ||u||_q < 1."""
    arr = as_vector(u, "direction", k)
    size = float(_norms(arr, spec.q))
    if size >= 1.0:
        raise DirectionDomainError(
            f"direction {arr.tolist()} has q-norm {size:.6g} >= 1 (q={spec.q:.6g})"
        )
    return arr


def phi(u, t, spec: NormSpec) -> float:
    """Phi_p(u, t) = ||t||_p + <u, t>."""
    t_arr = as_vector(t, "t")
    u_arr = as_direction(u, spec, t_arr.size)
    return float(_norms(t_arr, spec.p) + u_arr @ t_arr)


def _pair(x, theta) -> tuple[np.ndarray, np.ndarray]:
    x_arr = as_vector(x, "x")
    return x_arr, as_vector(theta, "theta", x_arr.size)


def score_psi(x, theta, spec: NormSpec) -> np.ndarray:
    """Gradient of theta -> ||x - theta||_p, with sign(0) = 0."""
    x_arr, t_arr = _pair(x, theta)
    scores, _, coincident = score_rows(x_arr[None, :], t_arr, spec)
    if coincident[0]:
        raise CoincidentPointError("score is undefined at x == theta")
    return scores[0]


def score_psi_u(x, xi, u, spec: NormSpec) -> np.ndarray:
    """score_psi(x, xi) + u."""
    psi = score_psi(x, xi, spec)
    u_arr = as_direction(u, spec, psi.size)
    if not np.any(u_arr):
        return psi
    return psi + u_arr


def psi_dot(x, theta, spec: NormSpec) -> np.ndarray:
    """Jacobian of theta -> score_psi(x, theta)."""
    x_arr, t_arr = _pair(x, theta)
    d = x_arr - t_arr
    r = float(_norms(d, spec.p))
    if r == 0.0:
        raise CoincidentPointError("psi_dot is undefined at x == theta")
    k = d.size
    if spec.p == 2.0:
        return (np.eye(k) - np.outer(d, d) / (r * r)) / r
    if spec.p < 2.0 and np.any(d == 0.0):
        raise SingularityError(f"psi_dot diverges at a coordinate tie for p={spec.p} < 2")
    ratio = np.abs(d) / r
    s = np.sign(d) * _power(ratio, spec.p - 1.0)
    return (spec.p - 1.0) / r * (np.diag(_power(ratio, spec.p - 2.0)) - np.outer(s, s))


def sigma_integrand(x, theta, spec: NormSpec) -> np.ndarray:
    """y y^T / ||x - theta||_p^(2(p-1)); the outer product of the score."""
    x_arr, t_arr = _pair(x, theta)
    d = x_arr - t_arr
    r = float(_norms(d, spec.p))
    if r == 0.0:
        raise CoincidentPointError("sigma integrand is undefined at x == theta")
    s = np.sign(d) * _power(np.abs(d) / r, spec.p - 1.0)
    return np.outer(s, s)


# --- row-wise forms ---


def row_norms(data: np.ndarray, center: np.ndarray, spec: NormSpec) -> np.ndarray:
    """||X_i - center||_p for every row."""
    return _norms(data - center, spec.p)


def score_rows(
    data: np.ndarray, theta: np.ndarray, spec: NormSpec, tol: float = 0.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Scores psi(X_i, theta) for all rows.

    Returns ``(scores, distances, coincident)``; rows with distance <= tol
    are flagged coincident and get a zero score.
    """
    d = data - theta
    r = _norms(d, spec.p)
    coincident = r <= tol
    safe = np.where(coincident, 1.0, r)[:, None]
    scores = -np.sign(d) * _power(np.abs(d) / safe, spec.p - 1.0)
    scores[coincident] = 0.0
    return scores, r, coincident


def psi_dot_sum(
    data: np.ndarray,
    theta: np.ndarray,
    spec: NormSpec,
    weights: np.ndarray,
    mask: np.ndarray,
) -> np.ndarray:
    """sum_i w_i psi_dot(X_i, theta) over the rows selected by ``mask``."""
    x = data[mask]
    w = weights[mask]
    k = data.shape[1]
    if x.shape[0] == 0:
        return np.zeros((k, k))
    d = x - theta
    r = _norms(d, spec.p)
    c = w * (spec.p - 1.0) / r
    ratio = np.abs(d) / r[:, None]
    s = np.sign(d) * _power(ratio, spec.p - 1.0)
    if spec.p == 2.0:
        diag = np.full(k, c.sum())
    else:
        if spec.p < 2.0 and np.any(d == 0.0):
            raise SingularityError(f"psi_dot diverges at a coordinate tie for p={spec.p} < 2")
        diag = c @ _power(ratio, spec.p - 2.0)
    return np.diag(diag) - (s * c[:, None]).T @ s
