from lpmedian.management.commands._base import GeomedCommand, parse_columns
from lpmedian.serializers import NormOptionsSerializer, PosteriorOptionsSerializer
from lpmedian.services.run_service import IRIS_SPECIES_COLUMN, run_iris


class Command(GeomedCommand):
    help = (
        "Credible ellipsoids of the spatial median for each iris species. "
        "Expects a CSV with a header row, four numeric feature columns "
        "(sepal_length, sepal_width, petal_length, petal_width by default) "
        "and a species column."
    )
    output_name = "iris"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--input", required=True, help="Path to the iris CSV file.")
        parser.add_argument("--columns", help="Comma-separated feature columns.")
        parser.add_argument("--species-column", default=IRIS_SPECIES_COLUMN)
        parser.add_argument("--delimiter", default=",")
        parser.add_argument("--p", type=float, default=2.0)
        parser.add_argument("--draws", type=int, default=2000)
        parser.add_argument("--level", type=float, default=0.95)
        parser.add_argument("--seed", type=int, default=0)

    def run(self, **options):
        norm = self.validated(NormOptionsSerializer, {"p": options["p"]})
        post = self.validated(
            PosteriorOptionsSerializer,
            {"draws": options["draws"], "level": options["level"], "seed": options["seed"]},
        )
        return run_iris(
            options["input"],
            draws=post["draws"],
            level=post["level"],
            seed=post["seed"],
            p=norm["p"],
            features=parse_columns(options["columns"]),
            species_column=options["species_column"],
            delimiter=options["delimiter"],
        )
