from lpmedian.management.commands._base import GeomedCommand
from lpmedian.serializers import NormOptionsSerializer
from lpmedian.services.run_service import run_quantile


class Command(GeomedCommand):
    help = "Compute geometric quantiles of a data file at one or more directions."
    output_name = "quantile"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_input_arguments(parser)
        self.add_norm_arguments(parser)
        parser.add_argument(
            "--covariance", action="store_true", help="Append the joint plug-in sandwich covariance."
        )

    def run(self, **options):
        norm = self.validated(NormOptionsSerializer, {"p": options["p"], "u": options["u"]})
        dataset = self.load_dataset(options)
        return run_quantile(
            dataset, p=norm["p"], directions=norm["u"], covariance=options["covariance"]
        )
