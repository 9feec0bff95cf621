"""DRF serializers validating command options and simulation cells."""

from rest_framework import serializers

from lpmedian.engine.errors import InvalidInputError
from lpmedian.engine.lp_core import NormSpec, dual_norm
from lpmedian.services.simstudy import (
    BOX_SIZES,
    DISTRIBUTIONS,
    METHODS,
    REGIONS,
    SimConfig,
)

MAX_SEED = 2**64 - 1


def _parse_vector(text: str) -> list[float]:
    try:
        return [float(part) for part in str(text).split(",")]
    except ValueError:
        raise serializers.ValidationError(f"'{text}' is not a comma-separated list of numbers.") from None


class NormOptionsSerializer(serializers.Serializer):
    """p and the quantile directions given as "u1,u2,..." strings."""

    p = serializers.FloatField(default=2.0)
    u = serializers.ListField(child=serializers.CharField(), required=False, default=list)

    def validate_p(self, value):
        if not value > 1.0:
            raise serializers.ValidationError("Must be greater than 1.")
        return value

    def validate_u(self, value):
        return [_parse_vector(text) for text in value]

    def validate(self, attrs):
        directions = attrs["u"]
        if directions:
            lengths = {len(u) for u in directions}
            if len(lengths) != 1:
                raise serializers.ValidationError({"u": "All directions must have the same length."})
            spec = NormSpec(attrs["p"])
            for u in directions:
                try:
                    norm = dual_norm(u, spec)
                except InvalidInputError as exc:
                    raise serializers.ValidationError({"u": exc.message}) from None
                if not norm < 1.0:
                    raise serializers.ValidationError(
                        {"u": f"{u} has q-norm {norm:.6g}; directions must lie in the open unit ball."}
                    )
        return attrs


class PosteriorOptionsSerializer(serializers.Serializer):
    draws = serializers.IntegerField(min_value=1, default=2000)
    level = serializers.FloatField(default=0.95)
    region = serializers.ChoiceField(choices=list(REGIONS), default="box")
    method = serializers.ChoiceField(choices=list(METHODS), default="plain")
    seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED, default=0)
    candidates = serializers.IntegerField(min_value=1, default=500)

    def validate_level(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("Must lie strictly between 0 and 1.")
        return value


class SimConfigSerializer(serializers.Serializer):
    distribution = serializers.ChoiceField(choices=list(DISTRIBUTIONS))
    k = serializers.IntegerField(min_value=1)
    n = serializers.IntegerField(min_value=1)
    p = serializers.FloatField()
    method = serializers.ChoiceField(choices=list(METHODS), default="plain")
    region = serializers.ChoiceField(choices=list(REGIONS), default="box")
    level = serializers.FloatField(default=0.95)
    replications = serializers.IntegerField(min_value=1, default=500)
    draws = serializers.IntegerField(min_value=1, default=1000)
    seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED, default=0)
    n_candidates = serializers.IntegerField(min_value=1, default=500)
    box_size = serializers.ChoiceField(choices=list(BOX_SIZES), default="diagonal")

    def validate_p(self, value):
        if not value > 1.0:
            raise serializers.ValidationError("Must be greater than 1.")
        return value

    def validate_level(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("Must lie strictly between 0 and 1.")
        return value

    def validate(self, attrs):
        if attrs.get("method") == "affine" and attrs["n"] <= attrs["k"] + 2:
            raise serializers.ValidationError({"n": "Affine cells need n > k + 2."})
        return attrs

    def create(self, validated_data):
        return SimConfig(**validated_data)
