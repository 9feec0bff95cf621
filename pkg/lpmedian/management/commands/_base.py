"""
Shared plumbing for the lpmedian management commands.

Errors are rendered as one JSON document on stderr,

    {"error": {"code": "...", "message": "...", "details": ...}}

and mapped to the exit codes 2 (usage), 3 (input data), 4 (numerical) and
5 (internal).
"""

from __future__ import annotations

import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from lpmedian.engine.errors import GeomedError
from lpmedian.services.dataset import ingest_csv
from lpmedian.services.run_service import RunOutput, dump_json

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4
EXIT_INTERNAL = 5


def exit_code_for(exc: BaseException) -> int:
    match exc:
        case serializers.ValidationError():
            return EXIT_USAGE
        case GeomedError(category="input"):
            return EXIT_INPUT
        case GeomedError():
            return EXIT_NUMERICAL
    return EXIT_INTERNAL


def error_document(exc: BaseException) -> dict:
    if isinstance(exc, serializers.ValidationError):
        return {
            "error": {
                "code": "VALIDATION_ERROR",
                "message": "Command options failed validation.",
                "details": exc.detail,
            }
        }
    if isinstance(exc, GeomedError):
        return {"error": {"code": exc.code, "message": exc.message, "details": exc.details}}
    return {"error": {"code": "INTERNAL_ERROR", "message": str(exc) or type(exc).__name__, "details": None}}


def parse_where(values: list[str] | None) -> dict[str, str]:
    filters = {}
    for item in values or []:
        column, sep, value = item.partition("=")
        if not sep or not column.strip():
            raise serializers.ValidationError({"where": f"'{item}' is not of the form column=value."})
        filters[column.strip()] = value.strip()
    return filters


def parse_columns(value: str | None) -> list[str] | None:
    if not value:
        return None
    return [c.strip() for c in value.split(",") if c.strip()]


class GeomedCommand(BaseCommand):
    """
    Base command: subclasses implement ``run(**options) -> RunOutput``.

    The JSON document goes to stdout; with --out it is also written,
    together with its extra files and timing sidecar, to that directory.
    """

    output_name = "result"
    always_write = False

    def add_input_arguments(self, parser) -> None:
        parser.add_argument("--input", required=True, help="CSV or Excel data file.")
        parser.add_argument("--columns", help="Comma-separated column names (or positions) to use.")
        parser.add_argument(
            "--where", action="append", metavar="COLUMN=VALUE",
            help="Keep rows whose column equals the value (repeatable).",
        )
        parser.add_argument("--delimiter", default=",")
        parser.add_argument("--no-header", action="store_true", help="The file has no header row.")

    def add_norm_arguments(self, parser, *, directions: bool = True) -> None:
        parser.add_argument("--p", type=float, default=2.0, help="Exponent of the lp norm (> 1).")
        if directions:
            parser.add_argument(
                "--u", action="append", metavar="U1,U2,...",
                help="Quantile direction with q-norm < 1 (repeatable).",
            )

    def add_posterior_arguments(self, parser) -> None:
        parser.add_argument("--draws", type=int, default=2000, help="Posterior draws N.")
        parser.add_argument("--level", type=float, default=0.95)
        parser.add_argument("--region", default="box", help="box or ellipsoid.")
        parser.add_argument("--method", default="plain", help="plain or affine.")
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--candidates", type=int, default=500, help="Alpha subsets searched.")

    def add_arguments(self, parser) -> None:
        parser.add_argument("--out", help="Directory for the result files.")

    def load_dataset(self, options):
        return ingest_csv(
            options["input"],
            delimiter=options["delimiter"],
            has_header=not options["no_header"],
            select_columns=parse_columns(options["columns"]),
            filters=parse_where(options["where"]),
        )

    def validated(self, serializer_class, data: dict) -> dict:
        ser = serializer_class(data={k: v for k, v in data.items() if v is not None})
        ser.is_valid(raise_exception=True)
        return ser.validated_data

    def run(self, **options) -> RunOutput:
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            output = self.run(**options)
        except Exception as exc:
            code = exit_code_for(exc)
            if code == EXIT_INTERNAL:
                logger.exception("internal error in %s", self.output_name)
            self.stderr.write(dump_json(error_document(exc)), ending="")
            raise CommandError(str(exc), returncode=code) from exc

        out_dir = options.get("out")
        if out_dir is None and self.always_write:
            out_dir = settings.GEOMED_OUTPUT_DIR
        if out_dir is not None:
            output.write(Path(out_dir), self.output_name)
        return output.render()
