from django.apps import AppConfig


class LpmedianConfig(AppConfig):
    name = "lpmedian"
    verbose_name = "lp medians and geometric quantiles"
