"""
Django settings for the geomed project.

The project has no web surface and no database: it is a numerical library
driven through management commands (``python manage.py median ...``).

For the full list of settings and their values, see
https://docs.djangoproject.com/en/6.0/ref/settings/
"""

from pathlib import Path
from os import getenv
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = getenv("SECRET_KEY", "geomed-cli-no-web-surface")

DEBUG = getenv("DEBUG")

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "rest_framework",
    "lpmedian",
]

# No persistence: Django falls back to its dummy backend.
DATABASES = {}

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True


# Numerical engine

GEOMED_THREADS = max(1, int(getenv("GEOMED_THREADS", "1")))

GEOMED_OUTPUT_DIR = Path(getenv("GEOMED_OUTPUT_DIR", BASE_DIR / "output"))

GEOMED_SOLVER = {
    "tol": float(getenv("GEOMED_SOLVER_TOL", "1e-8")),
    "max_iter": int(getenv("GEOMED_SOLVER_MAX_ITER", "500")),
    "objective_rtol": float(getenv("GEOMED_SOLVER_OBJECTIVE_RTOL", "1e-12")),
}

# Monte Carlo acceptance tests (minutes each) only run when set.
GEOMED_SLOW_TESTS = getenv("GEOMED_SLOW_TESTS", "").lower() in ("1", "true", "yes")


# Logging goes to stderr; stdout carries JSON results.

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "stderr": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "plain",
        },
    },
    "loggers": {
        "lpmedian": {
            "handlers": ["stderr"],
            "level": getenv("GEOMED_LOG_LEVEL", "WARNING").upper(),
            "propagate": False,
        },
    },
}
