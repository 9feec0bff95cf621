from lpmedian.management.commands._base import GeomedCommand
from lpmedian.serializers import NormOptionsSerializer, PosteriorOptionsSerializer
from lpmedian.services.run_service import run_credible


class Command(GeomedCommand):
    help = "Bayesian-bootstrap credible regions for the median or quantiles."
    output_name = "credible"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_input_arguments(parser)
        self.add_norm_arguments(parser)
        self.add_posterior_arguments(parser)
        parser.add_argument(
            "--save-draws", action="store_true", help="Also write the posterior draws as draws.csv."
        )

    def run(self, **options):
        norm = self.validated(NormOptionsSerializer, {"p": options["p"], "u": options["u"]})
        post = self.validated(
            PosteriorOptionsSerializer,
            {key: options[key] for key in ("draws", "level", "region", "method", "seed", "candidates")},
        )
        dataset = self.load_dataset(options)
        return run_credible(
            dataset,
            p=norm["p"],
            directions=norm["u"],
            save_draws=options["save_draws"],
            **post,
        )
