"""Shared test helpers."""

from unittest import skipUnless

import numpy as np
from django.conf import settings
from django.test import tag


def slow(test):
    """Monte Carlo acceptance test: tagged "slow", skipped unless GEOMED_SLOW_TESTS is set."""
    return tag("slow")(skipUnless(settings.GEOMED_SLOW_TESTS, "set GEOMED_SLOW_TESTS=1")(test))


def direction_with_norm(rng: np.random.Generator, k: int, q: float, size: float) -> np.ndarray:
    """Random direction with q-norm equal to ``size``."""
    v = rng.standard_normal(k)
    return size * v / np.sum(np.abs(v) ** q) ** (1.0 / q)


def grid_minimize(data, w, u, p, rounds: int = 6) -> np.ndarray:
    """Brute-force 2-D minimizer of sum_i w_i (||X_i - xi||_p + <u, X_i - xi>)."""
    lo, hi = data.min(axis=0), data.max(axis=0)
    span = float(np.max(hi - lo)) or 1.0
    center = (lo + hi) / 2.0
    half = 3.0 * span
    points = 201
    for _ in range(rounds + 1):
        axis = np.linspace(-half, half, points)
        gx, gy = np.meshgrid(center[0] + axis, center[1] + axis, indexing="ij")
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        d = data[None, :, :] - grid[:, None, :]
        values = (np.sum(np.abs(d) ** p, axis=2) ** (1.0 / p) + d @ u) @ w
        center = grid[int(np.argmin(values))]
        step = 2.0 * half / (points - 1)
        half = 6.0 * step
        points = 61
    return center
