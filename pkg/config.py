"""
Runtime configuration for the quantum image compression toolkit
Environment variables (or a local .env file) override every default
"""
import os

from dotenv import load_dotenv

load_dotenv()


def _env_flag(name, default='false'):
    return os.environ.get(name, default).lower() in ('1', 'true', 'yes')


class Config:
    """Base configuration"""

    # Parallelism
    THREADS = int(os.environ.get('QIMG_THREADS', os.cpu_count() or 1))

    # Analytic cost model
    DEFAULT_RJ = float(os.environ.get('QIMG_DEFAULT_RJ', 0.1))

    # BEC preprocessing guard (the literal scan is O(2n*q*2^(4n)))
    BEC_MAX_N = int(os.environ.get('QIMG_BEC_MAX_N', 8))
    BEC_STRATEGY = os.environ.get('QIMG_BEC_STRATEGY', 'indexed')

    # Quantum JPEG pipeline
    PIPELINE_ENGINE = os.environ.get('QIMG_PIPELINE_ENGINE', 'vectorized')

    # Files
    OUT_DIR = os.environ.get('QIMG_OUT_DIR', 'out')
    CORPUS_DIR = os.environ.get('QIMG_CORPUS_DIR', 'corpus')
    STANDARD_IMAGE_DIR = os.environ.get('QIMG_STANDARD_DIR', os.path.join('corpus', 'standard'))

    # Logging
    LOG_LEVEL = os.environ.get('QIMG_LOG_LEVEL', 'INFO')
    LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

    # Slow acceptance runs (full BEC scans, 1000-block oracle sweeps)
    LONG_TESTS = _env_flag('QIMG_LONG_TESTS')


class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = os.environ.get('QIMG_LOG_LEVEL', 'DEBUG')


class ProductionConfig(Config):
    """Production configuration"""
    LOG_LEVEL = os.environ.get('QIMG_LOG_LEVEL', 'WARNING')


class TestingConfig(Config):
    """Testing configuration"""
    THREADS = 1
    OUT_DIR = os.environ.get('QIMG_OUT_DIR', os.path.join('out', 'test'))


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': Config
}


def get_config(name=None):
    """Return the configuration class selected by QIMG_ENV"""
    name = name or os.environ.get('QIMG_ENV', 'default')
    return config.get(name, Config)
