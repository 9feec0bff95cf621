"""
Simulation table configuration validator.

A table definition passed to ``simulate --config FILE`` is either a preset
grid or an explicit list of cells:

    {"preset": "table1", "method": "affine", "full_scale": false,
     "replications": 200, "draws": 1000, "seed": 7}

    {"title": "...", "cells": [{"distribution": "normal", "k": 2, ...}, ...]}

Returns a list of error dicts with 'field' and 'message' keys.
"""

from __future__ import annotations

from typing import Any

from lpmedian.serializers import SimConfigSerializer
from lpmedian.services.simstudy import METHODS, PRESETS

PRESET_KEYS = {"preset", "method", "full_scale", "replications", "draws", "seed", "title"}
COUNT_KEYS = ("replications", "draws")


def _flatten(prefix: str, errors: dict) -> list[dict[str, str]]:
    out = []
    for name, messages in errors.items():
        field = f"{prefix}.{name}" if name != "non_field_errors" else prefix
        for message in messages if isinstance(messages, list) else [messages]:
            out.append({"field": field, "message": str(message)})
    return out


def validate_table_config(config: Any) -> list[dict[str, str]]:
    """Validate a table definition. Returns a list of errors (empty = valid)."""
    errors: list[dict[str, str]] = []

    if not isinstance(config, dict):
        return [{"field": "configuration", "message": "Must be a JSON object."}]

    has_preset = "preset" in config
    has_cells = "cells" in config
    if has_preset == has_cells:
        return [
            {"field": "configuration", "message": "Give exactly one of 'preset' or 'cells'."}
        ]

    title = config.get("title")
    if title is not None and not isinstance(title, str):
        errors.append({"field": "configuration.title", "message": "Must be a string."})

    # preset grid
    if has_preset:
        if config["preset"] not in PRESETS:
            errors.append(
                {
                    "field": "configuration.preset",
                    "message": f"Unsupported. Allowed: {sorted(PRESETS)}.",
                }
            )
        unknown = sorted(set(config) - PRESET_KEYS)
        for key in unknown:
            errors.append({"field": f"configuration.{key}", "message": "Unknown key."})
        if "method" in config and config["method"] not in METHODS:
            errors.append(
                {
                    "field": "configuration.method",
                    "message": f"Unsupported. Allowed: {sorted(METHODS)}.",
                }
            )
        if "full_scale" in config and not isinstance(config["full_scale"], bool):
            errors.append({"field": "configuration.full_scale", "message": "Must be a boolean."})
        for key in COUNT_KEYS:
            value = config.get(key)
            if value is not None and (not isinstance(value, int) or isinstance(value, bool) or value < 1):
                errors.append({"field": f"configuration.{key}", "message": "Must be a positive integer."})
        seed = config.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64):
            errors.append({"field": "configuration.seed", "message": "Must be an integer in [0, 2**64)."})
        return errors

    # explicit cells
    cells = config["cells"]
    if not isinstance(cells, list) or len(cells) == 0:
        errors.append({"field": "configuration.cells", "message": "Must be a non-empty list."})
        return errors
    for i, cell in enumerate(cells):
        prefix = f"configuration.cells[{i}]"
        if not isinstance(cell, dict):
            errors.append({"field": prefix, "message": "Must be an object."})
            continue
        ser = SimConfigSerializer(data=cell)
        if not ser.is_valid():
            errors.extend(_flatten(prefix, ser.errors))

    return errors
