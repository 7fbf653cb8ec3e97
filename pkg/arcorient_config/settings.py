from __future__ import annotations

import os
import sys
from pathlib import Path

import dj_database_url
from django.core.exceptions import ImproperlyConfigured

BASE_DIR = Path(__file__).resolve().parent.parent

DEV_SECRET_KEY = "dev-only-arcorient-secret-key"
SECRET_KEY = os.getenv("DJANGO_SECRET_KEY") or os.getenv("SECRET_KEY") or DEV_SECRET_KEY
DEBUG = (os.getenv("DJANGO_DEBUG") or os.getenv("DEBUG") or "1").lower() in {
    "1",
    "true",
    "yes",
}
if not DEBUG and SECRET_KEY == DEV_SECRET_KEY:
    raise ImproperlyConfigured("Set DJANGO_SECRET_KEY before running with DEBUG off.")

ALLOWED_HOSTS: list[str] = []

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "orientations",
]

DATABASE_URL = os.getenv("DATABASE_URL", "").strip()
if DATABASE_URL:
    DATABASES = {
        "default": dj_database_url.parse(
            DATABASE_URL,
            conn_max_age=int(os.getenv("DB_CONN_MAX_AGE", "60")),
            conn_health_checks=True,
        )
    }
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": os.getenv("ARCORIENT_DB", str(BASE_DIR / "db.sqlite3")),
        }
    }

LANGUAGE_CODE = "en-us"
TIME_ZONE = os.getenv("DJANGO_TIME_ZONE", "UTC")
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


def _positive_int(name: str, default: int) -> int:
    raw = os.getenv(name, str(default)).strip()
    try:
        value = int(raw)
    except ValueError as exc:
        raise ImproperlyConfigured(f"{name} must be an integer, got {raw!r}.") from exc
    if value < 1:
        raise ImproperlyConfigured(f"{name} must be positive, got {value}.")
    return value


# Exhaustive oracles
DANGEROUS_SET_MAX_VERTICES = _positive_int("ARCORIENT_DANGEROUS_SET_MAX_VERTICES", 22)
PAIRING_MAX_VERTICES = _positive_int("ARCORIENT_PAIRING_MAX_VERTICES", 12)
PAIRING_ATTEMPTS = _positive_int("ARCORIENT_PAIRING_ATTEMPTS", 2000)

# Truncated infinite graphs
DEPTH_CAP = _positive_int("ARCORIENT_DEPTH_CAP", 64)
DEPTH_MARGIN = _positive_int("ARCORIENT_DEPTH_MARGIN", 2)
MAX_ROUNDS = _positive_int("ARCORIENT_MAX_ROUNDS", 8)
RAY_GRAPH_THRESHOLD = _positive_int("ARCORIENT_RAY_GRAPH_THRESHOLD", 1)

# Corpus runs
DEFAULT_SEED = int(os.getenv("ARCORIENT_DEFAULT_SEED", "1"))
CORPUS_WORKERS = _positive_int("ARCORIENT_CORPUS_WORKERS", 1)

LOG_LEVEL = os.getenv("ARCORIENT_LOG_LEVEL", "INFO").strip().upper()
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "{levelname} {asctime} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "orientations": {
            "handlers": ["console"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
    },
}

# Quiet logs under `manage.py test`.
if len(sys.argv) > 1 and sys.argv[1] == "test":
    LOGGING["loggers"]["orientations"]["level"] = "CRITICAL"
