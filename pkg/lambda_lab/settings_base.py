"""
Base Django settings for the lambda-soliton lab.
Shared by every environment; lambda_lab.settings layers the environment on top.
"""

from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'simulation',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [
            BASE_DIR / 'templates',
        ],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
        },
    },
]

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

TEST_RUNNER = 'lambda_lab.test_runner.LabTestRunner'

# Design defaults of the numerical experiments; the command-line flags start from these
SIMULATION_DEFAULTS = {
    'domain_length': 1.0,
    'n_points': 201,
    'dt': 1e-4,
    'n_steps': 20000,
    'snapshot_stride': 50,
    'lambda': 1.0,
    'c_coef': 1.0j,
    'lambda_grid': tuple(round(0.1 * i, 1) for i in range(1, 20)),
    'sweep_c_list': (0.5j, 1.0j, 1.5j),
    'height_c_list': (2.8j, 1.5j, 0.5j),
    'threshold_bracket': (1e-5, 1e-1),
    'threshold_tol': 1e-4,
    'ramp_width': 0.1,
    'gl_gammas': (0.5, 0.7, 0.9),
    'formation': {
        'min_lifetime': 20,
        'relative_prominence': 0.05,
        'absolute_prominence': 1e-7,
        'velocity_window': (0.2, 0.8),
    },
}

LOG_DIR = BASE_DIR / 'logs'

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
            'level': 'WARNING',
        },
        'file': {
            'class': 'logging.FileHandler',
            'filename': LOG_DIR / 'lambda_lab.log',
            'formatter': 'verbose',
            'delay': True,
        },
    },
    'root': {
        'handlers': ['console', 'file'],
        'level': 'INFO',
    },
    'loggers': {
        'django': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': False,
        },
        'simulation': {
            'handlers': ['console', 'file'],
            'level': 'INFO',
            'propagate': False,
        },
        'numba': {
            'level': 'WARNING',
        },
    },
}
