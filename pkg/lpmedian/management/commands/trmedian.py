from rest_framework import serializers

from lpmedian.management.commands._base import GeomedCommand
from lpmedian.serializers import NormOptionsSerializer, PosteriorOptionsSerializer
from lpmedian.services.run_service import run_trmedian


class Command(GeomedCommand):
    help = "Compute the transformation-retransformation (affine equivariant) median."
    output_name = "trmedian"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_input_arguments(parser)
        self.add_norm_arguments(parser, directions=False)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--candidates", type=int, default=500, help="Alpha subsets searched.")
        parser.add_argument("--alpha", help="Explicit comma-separated row indices i0,i1,...,ik.")
        parser.add_argument(
            "--covariance", action="store_true", help="Append X(alpha) cov_Z X(alpha)^T."
        )

    def run(self, **options):
        norm = self.validated(NormOptionsSerializer, {"p": options["p"]})
        post = self.validated(
            PosteriorOptionsSerializer, {"seed": options["seed"], "candidates": options["candidates"]}
        )
        alpha = None
        if options["alpha"]:
            try:
                alpha = [int(i) for i in options["alpha"].split(",")]
            except ValueError:
                raise serializers.ValidationError({"alpha": "Must be comma-separated row indices."}) from None
        dataset = self.load_dataset(options)
        return run_trmedian(
            dataset,
            p=norm["p"],
            seed=post["seed"],
            candidates=post["candidates"],
            alpha_indices=alpha,
            covariance=options["covariance"],
        )
