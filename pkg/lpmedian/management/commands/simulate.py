import json
from pathlib import Path

from rest_framework import serializers

from lpmedian.engine.errors import DataFileError
from lpmedian.management.commands._base import GeomedCommand
from lpmedian.serializers import SimConfigSerializer
from lpmedian.services.config_validator import validate_table_config
from lpmedian.services.run_service import run_simulate
from lpmedian.services.simstudy import PRESETS, preset_configs


def load_table_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFileError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataFileError(f"config file {path} is not valid JSON: {exc}") from None


def build_configs(config: dict):
    errors = validate_table_config(config)
    if errors:
        raise serializers.ValidationError(errors)
    if "preset" in config:
        options = {k: config[k] for k in ("method", "full_scale", "replications", "draws", "seed") if k in config}
        return preset_configs(config["preset"], **options)
    cells = []
    for cell in config["cells"]:
        ser = SimConfigSerializer(data=cell)
        ser.is_valid(raise_exception=True)
        cells.append(ser.save())
    return cells


class Command(GeomedCommand):
    help = (
        "Run a Monte Carlo coverage table; writes table.json, table.csv and table.txt. "
        "Box cells report the box diagonal as their size; set box_size to \"mean_width\" "
        "in a --config cell for the mean coordinate width. Ellipsoid cells report the radius."
    )
    output_name = "table"
    always_write = True

    def add_arguments(self, parser):
        super().add_arguments(parser)
        source = parser.add_mutually_exclusive_group()
        source.add_argument("--preset", help=f"One of {', '.join(PRESETS)}. Box sizes are diagonals.")
        source.add_argument("--config", help="JSON table definition (preset grid or explicit cells).")
        parser.add_argument("--method", help="plain or affine (table presets only).")
        parser.add_argument("--full-scale", action="store_true", help="Include n=10000 cells.")
        parser.add_argument("--replications", type=int)
        parser.add_argument("--draws", type=int)
        parser.add_argument("--seed", type=int)
        parser.add_argument("--title", default="")

    def run(self, **options):
        if options["config"]:
            config = load_table_config(options["config"])
        else:
            config = {"preset": options["preset"] or "desk"}
            if options["full_scale"]:
                config["full_scale"] = True
            for key in ("method", "replications", "draws", "seed"):
                if options[key] is not None:
                    config[key] = options[key]
        title = config.get("title") or options["title"] or config.get("preset", "")
        return run_simulate(build_configs(config), title=title, preset=config.get("preset"))
