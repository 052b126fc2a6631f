#!/usr/bin/env python3
"""
CP Toolkit - Configuration
Environment-based settings, read through python-decouple (.env or environment)
"""

from decouple import config as env


class Config:
    """Base configuration"""
    APP_NAME = 'cpkit'
    APP_VERSION = '1.0.0'
    ENVIRONMENT = 'development'

    # Logging
    LOG_LEVEL = env('LOG_LEVEL', default='WARNING')
    LOG_DIR = env('LOG_DIR', default='logs')
    LOG_TO_FILE = env('LOG_TO_FILE', default=False, cast=bool)
    LOG_FILE_MAX_BYTES = env('LOG_FILE_MAX_BYTES', default=10240000, cast=int)
    LOG_BACKUP_COUNT = env('LOG_BACKUP_COUNT', default=10, cast=int)

    # Solver defaults
    DEFAULT_MAX_ITERATIONS = env('CPKIT_MAX_ITERATIONS', default=100, cast=int)
    DEFAULT_TOL = env('CPKIT_TOL', default=0.9999, cast=float)
    DEFAULT_SEED = env('CPKIT_SEED', default=0, cast=int)
    DEFAULT_ALPHA = env('CPKIT_ALPHA', default=0.1, cast=float)
    DEFAULT_ACTIVATION_GAP = env('CPKIT_ACTIVATION_GAP', default=0.03, cast=float)

    # Above this size the direct fitness is never evaluated during runs
    DIRECT_FITNESS_MAX_ELEMENTS = env('CPKIT_DIRECT_FITNESS_MAX_ELEMENTS', default=10**6, cast=int)


class DevelopmentConfig(Config):
    """Development configuration"""
    ENVIRONMENT = 'development'
    LOG_LEVEL = env('LOG_LEVEL', default='INFO')


class TestingConfig(Config):
    """Testing configuration"""
    ENVIRONMENT = 'testing'
    LOG_LEVEL = 'WARNING'
    LOG_TO_FILE = False


class ProductionConfig(Config):
    """Production configuration"""
    ENVIRONMENT = 'production'
    LOG_TO_FILE = env('LOG_TO_FILE', default=True, cast=bool)


CONFIGS = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
}


def get_config(name=None):
    """Load configuration based on environment"""
    if name is None:
        name = env('CPKIT_ENV', default='development')
    return CONFIGS.get(name, DevelopmentConfig)
