"""Process-level configuration."""
import os

from flask import Config

ENV_PREFIX = "PORTFOLIO_CAM"


def create_config():
    """Configure and return the settings mapping.

    Defaults come from ``camera_portfolio.default_config``; environment
    variables prefixed with ``PORTFOLIO_CAM_`` override them, so
    ``PORTFOLIO_CAM_THREADS=4`` sets ``THREADS``.

    :returns: Instance of flask.Config
    """
    config = Config(os.path.dirname(os.path.abspath(__file__)))
    config.from_object("camera_portfolio.default_config")
    config.from_prefixed_env(ENV_PREFIX)

    return config


def thread_count(config):
    """Resolve the replication worker count from ``config``.

    :param config: Settings returned by :func:`create_config`
    :returns: Positive number of worker threads
    """
    threads = int(config.get("THREADS", 0))
    if threads < 0:
        raise ValueError(f"THREADS must be >= 0, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads
