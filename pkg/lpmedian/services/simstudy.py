"""
Monte Carlo coverage study for credible regions of the lp median.

One cell fixes the data law, dimension, sample size, norm, estimator
(plain or TR) and region shape; every replication draws a fresh data set,
samples the posterior, builds the region and records its size and whether
it contains the true median 0 (both laws are symmetric about 0).
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import product

import numpy as np
import pandas as pd

from lpmedian.engine.affine import select_alpha, tr_posterior_sample
from lpmedian.engine.bootstrap import RngSeed, posterior_sample
from lpmedian.engine.errors import (
    GeomedError,
    InvalidInputError,
    SimulationAbortedError,
)
from lpmedian.engine.lp_core import NormSpec
from lpmedian.engine.regions import contains, ellipsoid, hyperrectangle
from lpmedian.engine.solver import SolverOptions

logger = logging.getLogger(__name__)

DISTRIBUTIONS = ("normal", "laplace")
METHODS = ("plain", "affine")
REGIONS = ("box", "ellipsoid")
BOX_SIZES = ("diagonal", "mean_width")

# Laplace(0, b) has variance 2 b^2.
LAPLACE_SCALE = 1.0 / math.sqrt(2.0)

MAX_FAILED_FRACTION = 0.01

# Streams under one replication seed.
DATA_STREAM = 0
ALPHA_STREAM = 1
POSTERIOR_STREAM = 2


def gen_data(distribution: str, n: int, k: int, seed: RngSeed) -> np.ndarray:
    """n iid draws with mean 0 and identity covariance."""
    if int(n) < 1 or int(k) < 1:
        raise InvalidInputError(f"n and k must be >= 1, got n={n}, k={k}")
    gen = seed.generator()
    match distribution:
        case "normal":
            return gen.standard_normal((int(n), int(k)))
        case "laplace":
            return gen.laplace(0.0, LAPLACE_SCALE, (int(n), int(k)))
    raise InvalidInputError(f"distribution must be one of {DISTRIBUTIONS}, got {distribution!r}")


@dataclass(frozen=True, slots=True)
class SimConfig:
    distribution: str
    k: int
    n: int
    p: float
    method: str = "plain"
    region: str = "box"
    level: float = 0.95
    replications: int = 500
    draws: int = 1000
    seed: int = 0
    n_candidates: int = 500
    box_size: str = "diagonal"

    def __post_init__(self) -> None:
        for name, value, allowed in (
            ("distribution", self.distribution, DISTRIBUTIONS),
            ("method", self.method, METHODS),
            ("region", self.region, REGIONS),
            ("box_size", self.box_size, BOX_SIZES),
        ):
            if value not in allowed:
                raise InvalidInputError(f"{name} must be one of {allowed}, got {value!r}")
        for name in ("k", "n", "replications", "draws", "n_candidates"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 < self.level < 1.0:
            raise InvalidInputError(f"level must lie in (0, 1), got {self.level}")
        NormSpec(self.p)
        if self.method == "affine" and self.n <= self.k + 2:
            raise InvalidInputError(f"affine cells need n > k + 2, got n={self.n}, k={self.k}")

    @property
    def label(self) -> str:
        return f"{self.distribution}/k={self.k}/p={self.p:g}/n={self.n}/{self.method}/{self.region}"

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(slots=True)
class SimResult:
    config: SimConfig
    size: float
    size_se: float
    coverage: float
    completed: int
    failed: int = 0
    wall_clock: float = field(default=0.0, compare=False)

    @property
    def coverage_se(self) -> float:
        """Monte Carlo standard error sqrt(cov (1 - cov) / R)."""
        return math.sqrt(self.coverage * (1.0 - self.coverage) / self.completed)

    def as_dict(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "size": self.size,
            "size_se": self.size_se,
            "coverage": self.coverage,
            "coverage_se": self.coverage_se,
            "completed": self.completed,
            "failed": self.failed,
        }


def _replication(config: SimConfig, spec: NormSpec, opts: SolverOptions, index: int) -> tuple[float, bool] | None:
    seed = RngSeed(config.seed).child(index)
    try:
        data = gen_data(config.distribution, config.n, config.k, seed.child(DATA_STREAM))
        if config.method == "affine":
            alpha = select_alpha(data, config.n_candidates, seed.child(ALPHA_STREAM))
            post = tr_posterior_sample(data, alpha, spec, config.draws, seed.child(POSTERIOR_STREAM), opts)
        else:
            post = posterior_sample(data, None, spec, config.draws, seed.child(POSTERIOR_STREAM), opts)
        draws = post.block(0)
        if config.region == "ellipsoid":
            region = ellipsoid(draws, config.level)
            size = region.radius
        else:
            region = hyperrectangle(draws, config.level)
            size = region.diagonal if config.box_size == "diagonal" else region.diameter
    except GeomedError as exc:
        logger.warning("replication %d of %s failed: %s", index, config.label, exc)
        return None
    return size, contains(region, np.zeros(config.k))


def run_cell(config: SimConfig, opts: SolverOptions | None = None, *, workers: int = 1) -> SimResult:
    """Run the R replications of one cell; results are gathered by index."""
    spec = NormSpec(config.p, config.k)
    opts = opts or SolverOptions()
    started = time.perf_counter()

    def run(index: int):
        return _replication(config, spec, opts, index)

    indices = range(config.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, indices))
    else:
        outcomes = [run(i) for i in indices]

    done = [o for o in outcomes if o is not None]
    failed = len(outcomes) - len(done)
    if failed > MAX_FAILED_FRACTION * config.replications or not done:
        raise SimulationAbortedError(
            f"{failed} of {config.replications} replications failed in {config.label}",
            details={"config": config.as_dict(), "failed": failed},
        )
    sizes = np.array([s for s, _ in done])
    covered = np.array([c for _, c in done], dtype=float)
    size_se = float(sizes.std(ddof=1) / math.sqrt(len(sizes))) if len(sizes) > 1 else 0.0
    result = SimResult(
        config=config,
        size=float(sizes.mean()),
        size_se=size_se,
        coverage=float(covered.mean()),
        completed=len(done),
        failed=failed,
        wall_clock=time.perf_counter() - started,
    )
    logger.info(
        "%s: size %.4f, coverage %.3f (%d failed, %.1fs)",
        config.label, result.size, result.coverage, failed, result.wall_clock,
    )
    return result


@dataclass(slots=True)
class TableArtifact:
    title: str
    results: list[SimResult]

    def frame(self) -> pd.DataFrame:
        rows = []
        for r in self.results:
            c = r.config
            rows.append({
                "distribution": c.distribution,
                "k": c.k,
                "p": c.p,
                "n": c.n,
                "method": c.method,
                "region": c.region,
                "level": c.level,
                "replications": c.replications,
                "draws": c.draws,
                "size": r.size,
                "size_se": r.size_se,
                "coverage": r.coverage,
                "coverage_se": r.coverage_se,
                "failed": r.failed,
            })
        return pd.DataFrame(rows)

    def as_dict(self) -> dict:
        return {"title": self.title, "cells": [r.as_dict() for r in self.results]}

    def timing(self) -> dict:
        return {r.config.label: r.wall_clock for r in self.results}

    def to_csv(self) -> str:
        return self.frame().to_csv(index=False, float_format="%.17g", lineterminator="\n")

    def to_text(self) -> str:
        """Size and coverage blocks, rows (method, distribution, p), columns n."""
        df = self.frame()
        size_name = "Radius" if set(df["region"]) == {"ellipsoid"} else "Size"
        df["size_cell"] = [f"{s:.3f} ({e:.3f})" for s, e in zip(df["size"], df["size_se"])]
        df["coverage_cell"] = [f"{c:.3f} ({e:.3f})" for c, e in zip(df["coverage"], df["coverage_se"])]
        index = ["method", "region", "k", "distribution", "p"]
        blocks = [self.title] if self.title else []
        for column, heading in (("size_cell", size_name), ("coverage_cell", "Coverage")):
            table = df.pivot_table(index=index, columns="n", values=column, aggfunc="first")
            table.columns = [f"n={n}" for n in table.columns]
            blocks.append(f"{heading} (Monte Carlo s.e.)")
            blocks.append(table.to_string())
        return "\n\n".join(blocks) + "\n"


def run_table(configs: list[SimConfig], opts: SolverOptions | None = None, *, workers: int = 1, title: str = "") -> TableArtifact:
    if not configs:
        raise InvalidInputError("a table needs at least one cell")
    return TableArtifact(title, [run_cell(c, opts, workers=workers) for c in configs])


# --- presets ---

SAMPLE_SIZES = (100, 1000)
FULL_SCALE_SIZE = 10_000

# (region, k) of each published coverage table.
TABLE_LAYOUT = {
    "table1": ("box", 2),
    "table2": ("box", 3),
    "table3": ("ellipsoid", 2),
    "table4": ("ellipsoid", 3),
}
PRESETS = ("desk", *TABLE_LAYOUT)


def preset_configs(
    name: str,
    *,
    method: str = "plain",
    full_scale: bool = False,
    replications: int | None = None,
    draws: int | None = None,
    seed: int = 0,
) -> list[SimConfig]:
    """Cells of a named preset, in table order (distribution, p, n)."""
    if name == "desk":
        base = SimConfig("normal", 2, 100, 2.0, "plain", "box", replications=500, draws=1000, seed=seed)
        cells = [replace(base, n=n) for n in SAMPLE_SIZES]
    elif name in TABLE_LAYOUT:
        region, k = TABLE_LAYOUT[name]
        sizes = (*SAMPLE_SIZES, FULL_SCALE_SIZE) if full_scale else SAMPLE_SIZES
        cells = [
            SimConfig(dist, k, n, p, method, region, replications=500, draws=2000, seed=seed)
            for dist, p, n in product(DISTRIBUTIONS, (2.0, 3.0), sizes)
        ]
    else:
        raise InvalidInputError(f"unknown preset {name!r}; choose from {PRESETS}")
    overrides = {}
    if replications is not None:
        overrides["replications"] = replications
    if draws is not None:
        overrides["draws"] = draws
    return [replace(c, **overrides) for c in cells] if overrides else cells
