"""Configure py.test default values and functionality."""

import os
import sys

import pytest

# Prefer modules from source directory rather than from site-python
PROJECT_ROOT_PATH = os.path.abspath(
    os.path.join(os.path.dirname(__file__), '..')
)
sys.path.insert(0, PROJECT_ROOT_PATH)

# pylint: disable=wrong-import-position
from camera_portfolio.config import create_config  # noqa: E402
from camera_portfolio.scenario import load_scenario  # noqa: E402
from tests.utils import scenario_text  # noqa: E402


@pytest.fixture(scope="function")
def settings(monkeypatch):
    """Process configuration without environment overrides.

    :returns: flask.Config
    """
    for key in list(os.environ):
        if key.startswith("PORTFOLIO_CAM_"):
            monkeypatch.delenv(key)
    return create_config()


@pytest.fixture(scope="function")
def write_scenario_file(tmpdir):
    """Return a function writing scenario text into ``tmpdir``.

    The function takes the keyword arguments of
    :func:`tests.utils.scenario_text` (or ``text`` for a verbatim file)
    and returns the path of the written file.
    """
    counter = iter(range(1000))

    def _write(text=None, **kwargs):
        path = tmpdir.join(f"scenario{next(counter)}.scenario")
        path.write_text(text if text is not None else scenario_text(**kwargs),
                        encoding="utf-8")
        return str(path)

    return _write


@pytest.fixture(scope="function")
def small_scenario(write_scenario_file, settings):
    """Four cameras in two groups, with a small optimizer and few epochs.

    :returns: ScenarioConfig
    """
    return load_scenario(write_scenario_file(), settings)
