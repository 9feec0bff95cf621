import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "geomed.settings")
django.setup()
