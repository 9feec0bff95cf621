from lpmedian.management.commands._base import GeomedCommand
from lpmedian.serializers import NormOptionsSerializer
from lpmedian.services.run_service import run_median


class Command(GeomedCommand):
    help = "Compute the lp median of a data file."
    output_name = "median"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_input_arguments(parser)
        self.add_norm_arguments(parser, directions=False)
        parser.add_argument(
            "--covariance", action="store_true", help="Append the plug-in sandwich covariance."
        )

    def run(self, **options):
        norm = self.validated(NormOptionsSerializer, {"p": options["p"]})
        dataset = self.load_dataset(options)
        return run_median(dataset, p=norm["p"], covariance=options["covariance"])
