"""Tests for ``camera_portfolio.cli`` module."""
import logging
import os

import pytest
from click.testing import CliRunner

from camera_portfolio.cli import cli
from camera_portfolio.report import read_results_csv
from camera_portfolio.scenario import bundled_scenario, load_scenario
from camera_portfolio.sim import RunStats, Strategy


@pytest.fixture(autouse=True)
def package_log_level():
    """Restore the package logger level changed by the ``cli`` group."""
    logger = logging.getLogger("camera_portfolio")
    level = logger.level
    yield
    logger.setLevel(level)


@pytest.fixture(scope="function")
def run(settings):
    """Return a function invoking the command line interface.

    :param settings: Removes environment overrides for the test
    """
    runner = CliRunner()

    def _run(*args):
        return runner.invoke(cli, [str(arg) for arg in args])

    return _run


def test_validate_bundled(run):
    """Test validating the bundled scenario.

    :param run: Command line runner
    """
    result = run("validate", bundled_scenario("default7"))

    assert result.exit_code == 0
    assert "cameras: 7" in result.output
    assert "psi: 3, 4, 5" in result.output
    assert "quality threshold: 408" in result.output
    assert result.output.splitlines()[-1] == "ok"


@pytest.mark.parametrize(
    ("kwargs", "expected"),
    [
        ({"correlation": {"0,1": 1.5}},
         "invalid scenario: [correlation] rho[0,1] = 1.5 is outside [-1, 1]"),
        ({"correlation": {"0,1": 0.9, "0,2": -0.9, "1,2": 0.9}},
         "most negative eigenvalue is -0.8"),
        ({"experiment": {"selection_mode": "sometimes"}},
         "invalid scenario: [experiment] selection_mode"),
    ]
)
def test_validate_invalid(run, write_scenario_file, kwargs, expected):
    """Test that invalid scenarios exit with status 1.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param kwargs: Scenario text arguments
    :param expected: Expected error message
    """
    result = run("validate", write_scenario_file(**kwargs))

    assert result.exit_code == 1
    assert expected in result.output
    assert "ok" not in result.output.splitlines()


def test_validate_missing_file(run, tmpdir):
    """Test validating a scenario that does not exist.

    :param run: Command line runner
    :param tmpdir: Temporary directory
    """
    result = run("validate", tmpdir.join("absent.scenario"))

    assert result.exit_code == 1
    assert "missing file: " in result.output


def test_usage_errors(run, write_scenario_file):
    """Test that usage errors exit with status 1.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    """
    path = write_scenario_file()

    assert run("frobnicate").exit_code == 1
    assert run("sweep", path, "epochs", "1,2").exit_code == 1
    assert run("sweep", path, "theta", "a,b").exit_code == 1
    assert run("compare", path, "--mode", "often").exit_code == 1


def test_optimize(run, write_scenario_file, tmpdir):
    """Test solving a scenario with the oracle comparison.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param tmpdir: Temporary directory
    """
    out = tmpdir.join("alpha.csv")
    result = run("optimize", write_scenario_file(), "--oracle", "--steps",
                 "3", "--out", out)

    assert result.exit_code == 0
    assert "solver: ga" in result.output
    assert "solver: grid_oracle" in result.output
    assert "gap: " in result.output
    assert out.read().startswith("camera,alpha\n")
    assert len(out.read().splitlines()) == 5


def test_optimize_infeasible(run, write_scenario_file):
    """Test that an unreachable threshold exits with status 2 after
    printing the best effort selection.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    """
    result = run("optimize", write_scenario_file(theta=10000), "--psi", "2")

    assert result.exit_code == 2
    assert "alpha: [" in result.output
    assert "feasible: no" in result.output
    assert "infeasible: " in result.output


def test_compare_writes_results(run, write_scenario_file, tmpdir):
    """Test that compare output is byte-identical across runs.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param tmpdir: Temporary directory
    """
    path = write_scenario_file()
    first = tmpdir.join("first.csv")
    second = tmpdir.join("second.csv")

    assert run("compare", path, "--out", first).exit_code == 0
    assert run("compare", path, "--out", second).exit_code == 0

    assert first.read_binary() == second.read_binary()
    rows = read_results_csv(str(first))
    assert [(row["psi"], row["strategy"]) for row in rows] == [
        (2.0, "baseline_top_expected"), (2.0, "portfolio"),
        (3.0, "baseline_top_expected"), (3.0, "portfolio")]
    assert all(row["epochs"] == 600 and row["seed"] == 5 for row in rows)
    assert os.path.isfile(f"{first}.plot.csv")


def test_compare_overrides(run, write_scenario_file, tmpdir):
    """Test --seed, --mode and the scenario's output path.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param tmpdir: Temporary directory
    """
    path = write_scenario_file(extra="[output]\ncsv = table.csv\n")
    result = run("compare", path, "--seed", "42", "--mode", "top")

    assert result.exit_code == 0
    rows = read_results_csv(str(tmpdir.join("table.csv")))
    assert {row["seed"] for row in rows} == {42}


def test_compare_unwritable(run, write_scenario_file, tmpdir):
    """Test that an unwritable output path exits with status 1.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param tmpdir: Temporary directory
    """
    result = run("compare", write_scenario_file(psi_values="2"), "--out",
                 tmpdir.join("missing", "results.csv"))

    assert result.exit_code == 1
    assert "unwritable output: " in result.output


def test_compare_threads_from_environment(run, write_scenario_file, mocker,
                                          monkeypatch, tmpdir):
    """Test that PORTFOLIO_CAM_THREADS sets the worker count.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param mocker: pytest-mock mocker
    :param monkeypatch: pytest monkeypatch fixture
    :param tmpdir: Temporary directory
    """
    monkeypatch.chdir(tmpdir)
    monkeypatch.setenv("PORTFOLIO_CAM_THREADS", "3")
    stats = RunStats(Strategy.PORTFOLIO, 2.0, 1.0, 0.0, 1.0, 10, (0.7, 1.0))
    mock_compare = mocker.patch("camera_portfolio.cli.compare_strategies",
                                return_value=[stats])

    result = run("compare", write_scenario_file())

    assert result.exit_code == 0
    assert mock_compare.call_args.kwargs["threads"] == 3
    assert "portfolio" in result.output


def test_compare_default_output(run, write_scenario_file, tmpdir,
                                monkeypatch):
    """Test that compare writes NAME.results.csv when no path is given.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param tmpdir: Temporary directory
    :param monkeypatch: pytest monkeypatch fixture
    """
    workdir = tmpdir.mkdir("work")
    monkeypatch.chdir(workdir)
    path = write_scenario_file(psi_values="2")
    result = run("compare", path)

    assert result.exit_code == 0
    out = workdir.join("scenario0.results.csv")
    assert "wrote scenario0.results.csv" in result.output
    assert len(read_results_csv(str(out))) == 2
    assert os.path.isfile(f"{out}.plot.csv")


def test_sweep(run, write_scenario_file, tmpdir, caplog):
    """Test sweeping the correlation scale.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param tmpdir: Temporary directory
    :param caplog: Captured log records
    """
    caplog.set_level(logging.INFO)
    out = tmpdir.join("sweep.csv")
    result = run("sweep", write_scenario_file(), "correlation_scale",
                 "0,0.5,1", "--out", out)

    assert result.exit_code == 0
    rows = read_results_csv(str(out))
    assert len(rows) == 12
    assert [row["sweep_value"] for row in rows[::4]] == [0.0, 0.5, 1.0]
    assert "correlation_scale = 0.5" in result.output
    assert "mean portfolio objective" in caplog.text


def test_partial_sweep(run, write_scenario_file, tmpdir, caplog):
    """Test that failing sweep values exit with status 3 after writing the
    others.

    :param run: Command line runner
    :param write_scenario_file: Scenario file factory
    :param tmpdir: Temporary directory
    :param caplog: Captured log records
    """
    out = tmpdir.join("sweep.csv")
    result = run("sweep", write_scenario_file(psi_values="2"), "temporal_phi",
                 "0,1.5", "--out", out)

    assert result.exit_code == 3
    assert "partial sweep: 1 of 2 values failed: 1.5" in result.output
    assert "Skipping temporal_phi=1.5" in caplog.text
    assert {row["sweep_value"] for row in read_results_csv(str(out))} == {0.0}


def test_generate(run, tmpdir, settings):
    """Test writing a generated scenario.

    :param run: Command line runner
    :param tmpdir: Temporary directory
    :param settings: Configuration without environment overrides
    """
    out = tmpdir.join("generated.scenario")
    result = run("generate", out, "--cameras", "5", "--blocks", "2",
                 "--seed", "3")

    assert result.exit_code == 0
    assert f"wrote {out}" in result.output
    cfg = load_scenario(str(out), settings)
    assert len(cfg.cameras) == 5
    assert cfg.master_seed == 3

    assert run("generate", tmpdir.join("no", "such.scenario")).exit_code == 1
