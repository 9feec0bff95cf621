"""
Command orchestration.

Each ``run_*`` function takes already-validated options, calls the engine
and returns a RunOutput: the deterministic JSON document
``{"manifest": ..., "result": ...}``, any extra files (CSV tables, draws,
polylines), and timing information kept out of the document so reruns
produce byte-identical output.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
from django.conf import settings
from django.utils import timezone
from rest_framework.utils.encoders import JSONEncoder

import lpmedian
from lpmedian.engine.affine import build_alpha, select_alpha, tr_median, tr_posterior_sample, tr_sandwich
from lpmedian.engine.asymptotics import quantile_sandwich, sandwich
from lpmedian.engine.bootstrap import RngSeed, posterior_sample
from lpmedian.engine.errors import InvalidInputError
from lpmedian.engine.lp_core import NormSpec
from lpmedian.engine.regions import (
    Ellipsoid,
    ellipse_polyline,
    ellipsoid,
    hyperrectangle,
    principal_axes,
)
from lpmedian.engine.solver import (
    SolverOptions,
    geometric_quantile,
    uniform_weights,
    weighted_median,
)
from lpmedian.services.dataset import Dataset, column_values, csv_text, frame, ingest_csv
from lpmedian.services.simstudy import SimConfig, run_table

logger = logging.getLogger(__name__)

ALPHA_STREAM = 1
POSTERIOR_STREAM = 2

# Principal axes of the 95% credible ellipsoid of the Setosa spatial median
# (p = 2) as published. Row j is the j-th axis (a column of the printed table).
PUBLISHED_SETOSA_AXES = np.array([
    [0.0580, -0.1461, -0.2965, 0.9420],
    [-0.3129, 0.2193, 0.8626, 0.3252],
    [-0.6747, -0.6143, 0.4089, -0.0081],
    [-0.6629, -0.7437, -0.0252, -0.0824],
])

IRIS_FEATURES = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
IRIS_SPECIES_COLUMN = "species"
POLYLINE_POINTS = 128


# --- output plumbing ---


def dump_json(document) -> str:
    return json.dumps(document, cls=JSONEncoder, sort_keys=True, indent=2) + "\n"


def atomic_write_text(path: Path, text: str) -> Path:
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.info("wrote %s", path)
    return path


def solver_options() -> SolverOptions:
    return SolverOptions(**getattr(settings, "GEOMED_SOLVER", {}))


def worker_count() -> int:
    return max(1, int(getattr(settings, "GEOMED_THREADS", 1)))


@dataclass(slots=True)
class RunManifest:
    command: str
    config: dict
    seed: int | None = None
    inputs: list[dict] = field(default_factory=list)
    version: str = lpmedian.__version__
    started_at: str = ""
    finished_at: str = ""

    def as_dict(self) -> dict:
        """Deterministic fields only; timestamps live in the timing sidecar."""
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "version": self.version,
        }


@dataclass(slots=True)
class RunOutput:
    manifest: RunManifest
    result: dict
    files: dict[str, str] = field(default_factory=dict)
    wall_clock: float = 0.0
    extra_timing: dict = field(default_factory=dict)

    def document(self) -> dict:
        return {"manifest": self.manifest.as_dict(), "result": self.result}

    def render(self) -> str:
        return dump_json(self.document())

    def timing(self) -> dict:
        return {
            "started_at": self.manifest.started_at,
            "finished_at": self.manifest.finished_at,
            "wall_clock_seconds": self.wall_clock,
            **self.extra_timing,
        }

    def write(self, out_dir: Path, name: str) -> list[Path]:
        out_dir = Path(out_dir)
        written = [atomic_write_text(out_dir / f"{name}.json", self.render())]
        for filename, text in sorted(self.files.items()):
            written.append(atomic_write_text(out_dir / filename, text))
        written.append(atomic_write_text(out_dir / f"{name}.timing.json", dump_json(self.timing())))
        return written


class _Clock:
    def __init__(self, manifest: RunManifest) -> None:
        self.manifest = manifest

    def __enter__(self) -> _Clock:
        self.manifest.started_at = timezone.now().isoformat()
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        self.manifest.finished_at = timezone.now().isoformat()
        self.elapsed = time.perf_counter() - self._t0


def _spec(p: float, k: int) -> tuple[NormSpec, dict]:
    spec = NormSpec(p, k)
    return spec, {"p": spec.p, "q": spec.q, "k": k, "in_theory_domain": spec.in_theory_domain}


# --- commands ---


def run_median(dataset: Dataset, *, p: float, covariance: bool = False) -> RunOutput:
    x = dataset.matrix
    manifest = RunManifest("median", {"p": p, "covariance": covariance}, inputs=[dataset.describe()])
    with _Clock(manifest) as clock:
        spec, norm = _spec(p, x.shape[1])
        report = weighted_median(x, uniform_weights(x.shape[0]), spec, solver_options())
        result = {"norm": norm, "n": x.shape[0], "median": report.minimizer, "solve": report.as_dict()}
        if covariance:
            result["covariance"] = sandwich(x, report.minimizer, spec).as_dict()
    return RunOutput(manifest, result, wall_clock=clock.elapsed)


def run_quantile(dataset: Dataset, *, p: float, directions: list[list[float]], covariance: bool = False) -> RunOutput:
    x = dataset.matrix
    if not directions:
        raise InvalidInputError("at least one direction --u is required")
    manifest = RunManifest(
        "quantile", {"p": p, "u": directions, "covariance": covariance}, inputs=[dataset.describe()]
    )
    with _Clock(manifest) as clock:
        spec, norm = _spec(p, x.shape[1])
        w = uniform_weights(x.shape[0])
        opts = solver_options()
        reports = [geometric_quantile(x, w, u, spec, opts) for u in directions]
        result = {
            "norm": norm,
            "n": x.shape[0],
            "quantiles": [
                {"u": u, "quantile": r.minimizer, "solve": r.as_dict()}
                for u, r in zip(directions, reports)
            ],
        }
        if covariance:
            cov = quantile_sandwich(x, [r.minimizer for r in reports], directions, spec)
            result["covariance"] = {"directions": cov.directions, "full": cov.full()}
    return RunOutput(manifest, result, wall_clock=clock.elapsed)


def _region(draws: np.ndarray, level: float, kind: str) -> dict:
    if kind == "ellipsoid":
        region = ellipsoid(draws, level)
        return {**region.as_dict(), "principal_axes": principal_axes(region).as_dict()}
    return hyperrectangle(draws, level).as_dict()


def _draws_csv(draws: np.ndarray, m: int, k: int) -> str:
    columns = [f"u{l + 1}_x{j + 1}" for l in range(m) for j in range(k)]
    return csv_text(frame(draws, columns))


def run_credible(
    dataset: Dataset,
    *,
    p: float,
    directions: list[list[float]],
    draws: int,
    level: float,
    region: str,
    method: str,
    seed: int,
    candidates: int,
    save_draws: bool = False,
) -> RunOutput:
    x = dataset.matrix
    config = {
        "p": p, "u": directions, "draws": draws, "level": level, "region": region,
        "method": method, "candidates": candidates, "save_draws": save_draws,
    }
    manifest = RunManifest("credible", config, seed=seed, inputs=[dataset.describe()])
    root = RngSeed(seed)
    with _Clock(manifest) as clock:
        spec, norm = _spec(p, x.shape[1])
        opts = solver_options()
        result: dict = {"norm": norm, "n": x.shape[0]}
        if method == "affine":
            if directions:
                raise InvalidInputError("the affine method is defined for the median only; drop --u")
            alpha = select_alpha(x, candidates, root.child(ALPHA_STREAM))
            post = tr_posterior_sample(
                x, alpha, spec, draws, root.child(POSTERIOR_STREAM), opts, workers=worker_count()
            )
            result["alpha"] = {"indices": list(alpha.indices), "criterion": alpha.criterion}
        else:
            post = posterior_sample(
                x, directions or None, spec, draws, root.child(POSTERIOR_STREAM), opts, workers=worker_count()
            )
        result["draws"] = {"requested": post.requested, "kept": int(post.draws.shape[0]), "dropped": post.dropped}
        result["regions"] = [
            {"u": post.directions[l], "estimate": post.estimates[l], "region": _region(post.block(l), level, region)}
            for l in range(post.m)
        ]
    files = {"draws.csv": _draws_csv(post.draws, post.m, post.k)} if save_draws else {}
    return RunOutput(manifest, result, files=files, wall_clock=clock.elapsed)


def run_trmedian(
    dataset: Dataset,
    *,
    p: float,
    seed: int,
    candidates: int,
    alpha_indices: list[int] | None = None,
    covariance: bool = False,
) -> RunOutput:
    x = dataset.matrix
    config = {"p": p, "candidates": candidates, "alpha": alpha_indices, "covariance": covariance}
    manifest = RunManifest("trmedian", config, seed=seed, inputs=[dataset.describe()])
    with _Clock(manifest) as clock:
        spec, norm = _spec(p, x.shape[1])
        opts = solver_options()
        if alpha_indices:
            alpha = build_alpha(x, alpha_indices)
        else:
            alpha = select_alpha(x, candidates, RngSeed(seed).child(ALPHA_STREAM))
        result = {
            "norm": norm,
            "n": x.shape[0],
            "alpha": {"indices": list(alpha.indices), "criterion": alpha.criterion, "transform": alpha.transform},
            "median": tr_median(x, alpha, spec, opts),
        }
        if covariance:
            result["covariance"] = tr_sandwich(x, alpha, spec, opts).as_dict()
    return RunOutput(manifest, result, wall_clock=clock.elapsed)


def run_simulate(configs: list[SimConfig], *, title: str = "", preset: str | None = None) -> RunOutput:
    manifest = RunManifest(
        "simulate",
        {"preset": preset, "title": title, "cells": [c.as_dict() for c in configs]},
        seed=configs[0].seed if configs else None,
    )
    with _Clock(manifest) as clock:
        table = run_table(configs, solver_options(), workers=worker_count(), title=title)
    files = {"table.csv": table.to_csv(), "table.txt": table.to_text()}
    return RunOutput(
        manifest, table.as_dict(), files=files, wall_clock=clock.elapsed, extra_timing={"cells": table.timing()}
    )


# --- iris ---


def axis_agreement(axes: np.ndarray, reference: np.ndarray = PUBLISHED_SETOSA_AXES) -> dict:
    """|cosine| between axes (rows) and the reference axes (rows)."""
    a = axes / np.linalg.norm(axes, axis=1, keepdims=True)
    b = reference / np.linalg.norm(reference, axis=1, keepdims=True)
    cosines = np.abs(a @ b.T)
    return {"matched": np.diag(cosines), "matrix": cosines}


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in text.strip().lower())


def run_iris(
    path: str,
    *,
    draws: int,
    level: float,
    seed: int,
    p: float = 2.0,
    features: list[str] | None = None,
    species_column: str = IRIS_SPECIES_COLUMN,
    delimiter: str = ",",
) -> RunOutput:
    """
    Per species: the credible ellipsoid of the 4-D median with its principal
    axes, and the credible ellipse of the 2-D median of every feature pair
    as a boundary polyline.
    """
    features = features or IRIS_FEATURES
    species = column_values(path, species_column, delimiter=delimiter)
    config = {
        "p": p, "draws": draws, "level": level, "features": features,
        "species_column": species_column, "species": species,
    }
    manifest = RunManifest("iris", config, seed=seed)
    files: dict[str, str] = {}
    root = RngSeed(seed)
    opts = solver_options()
    with _Clock(manifest) as clock:
        result = {"species": []}
        for s_index, name in enumerate(species):
            data = ingest_csv(path, delimiter=delimiter, select_columns=features, filters={species_column: name})
            if not manifest.inputs:
                manifest.inputs.append({"path": data.path, "sha256": data.sha256})
            x = data.matrix
            spec = NormSpec(p, x.shape[1])
            stream = root.child(s_index)
            post = posterior_sample(x, None, spec, draws, stream.child(0), opts, workers=worker_count())
            region = ellipsoid(post.block(0), level)
            axes = principal_axes(region)
            slug = _slug(name)
            files[f"iris_{slug}_axes.csv"] = csv_text(frame(axes.vectors.T, [f"axis{j + 1}" for j in range(x.shape[1])]))
            entry = {
                "name": name,
                "n": x.shape[0],
                "median": post.estimates[0],
                "ellipsoid": region.as_dict(),
                "principal_axes": axes.as_dict(),
                "pairs": [],
            }
            if x.shape[1] == PUBLISHED_SETOSA_AXES.shape[0]:
                entry["published_axes_agreement"] = axis_agreement(axes.vectors)
            for pair_index, (a, b) in enumerate(combinations(range(x.shape[1]), 2)):
                pair = x[:, [a, b]]
                pair_post = posterior_sample(
                    pair, None, NormSpec(p, 2), draws, stream.child(pair_index + 1), opts, workers=worker_count()
                )
                ellipse: Ellipsoid = ellipsoid(pair_post.block(0), level)
                filename = f"iris_{slug}_{features[a]}_{features[b]}.csv"
                files[filename] = csv_text(frame(ellipse_polyline(ellipse, POLYLINE_POINTS), [features[a], features[b]]))
                entry["pairs"].append({
                    "features": [features[a], features[b]],
                    "median": pair_post.estimates[0],
                    "ellipse": ellipse.as_dict(),
                    "polyline_file": filename,
                })
            result["species"].append(entry)
    return RunOutput(manifest, result, files=files, wall_clock=clock.elapsed)
