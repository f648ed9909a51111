"""
Django settings for renet_project project.

The project hosts the ReNet simulator app: the library modules, the run
registry (``ExperimentRun``) and the ``run``/``compare``/``entropy``/
``validate`` management commands.

Values that change between machines come from the environment, optionally
through a ``.env`` file at the project root.
"""

from pathlib import Path
import os

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')


def env_flag(name, default=False):
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ('1', 'true', 'yes', 'on')


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-renet-simulator-local-only')

DEBUG = env_flag('DJANGO_DEBUG', True)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'renet',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'renet_project.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]


# Database (run registry)

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_URL = '/static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging

RENET_LOG_LEVEL = os.getenv('RENET_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'renet': {
            'handlers': ['console'],
            'level': RENET_LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Simulator configuration

# Sweep every network invariant after each served request (slow, O(n) per request).
RENET_DEBUG_INVARIANTS = env_flag('RENET_DEBUG_INVARIANTS', False)

RENET_OUTPUT_DIR = Path(os.getenv('RENET_OUTPUT_DIR', BASE_DIR / 'runs'))

# Base layer of every ExperimentConfig; a JSON config file and --key flags override these.
RENET_DEFAULTS = {
    'workload': 'torus',
    'n': 256,
    'm': 200_000,
    'alpha': 1.0,
    'k': 8,
    'c': 4.0,
    'seed': 1,
    'rotation_accounting': 'unit',
    'vr_policy': 'lru',
    'baselines': ['stat', 'oblivious'],
    'repetitions': 1,
    'window': 10_000,
    'stride': 10_000,
    'base': 2.0,
    'record': True,
}
