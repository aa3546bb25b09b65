"""Scenario files.

A scenario is an INI document::

    [scenario]
    schema_version = 1
    name = two blocks

    [cameras]
    0 = 100
    1 = 130, 2, 2

    [correlation]
    0,1 = 0.8

    [disruption]
    temporal_phi = 0.0
    rng_seed = 0

    [optimizer]
    population_size = 100

    [experiment]
    theta = 240
    psi_values = 3, 4, 5

``theta`` is an absolute quality floor. ``theta_fraction`` replaces it
with a floor per budget, that fraction of the expected quality of the
``floor(psi)`` cameras with the largest expected resolution.

Every problem found while loading is collected and raised together in a
single ScenarioValidationError.
"""
import configparser
import dataclasses
import io
import logging
import os

import numpy as np

from camera_portfolio.config import create_config
from camera_portfolio.disruption import DisruptionProcessConfig
from camera_portfolio.errors import (NotPositiveSemidefiniteError,
                                     ScenarioNotFoundError,
                                     ScenarioParseError,
                                     ScenarioValidationError)
from camera_portfolio.model import (AvailabilityDist, CameraSpec,
                                    CorrelationMatrix, beta_mean, check_psd,
                                    correlation_problems)
from camera_portfolio.optimizer import GaConfig
from camera_portfolio.sim import ScenarioConfig, SelectionMode, Strategy

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCENARIO_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                            "scenarios")

_REQUIRED = "required"

# Known keys per section: key -> (converter, default)
_SIMPLE_SECTIONS = {
    "scenario": {
        "schema_version": (int, _REQUIRED),
        "name": (str, ""),
    },
    "disruption": {
        "temporal_phi": (float, 0.0),
        "rng_seed": (int, 0),
    },
    "optimizer": {
        "population_size": (int, None),
        "max_generations": (int, None),
        "crossover_rate": (float, None),
        "mutation_rate": (float, None),
        "mutation_scale": (float, None),
        "mutation_decay": (float, None),
        "elite_count": (int, None),
        "penalty_weight": (float, None),
        "penalty_factor": (float, None),
        "rng_seed": (int, None),
    },
    "experiment": {
        "theta": (float, None),
        "theta_fraction": (float, None),
        "psi_values": ("floats", _REQUIRED),
        "quality_threshold": (float, None),
        "min_views": (int, None),
        "epochs": (int, 10000),
        "replications": (int, 20),
        "selection_mode": (SelectionMode, SelectionMode.PROBABILISTIC),
        "strategies": ("strategies", (Strategy.PORTFOLIO,
                                      Strategy.BASELINE_TOP_EXPECTED)),
        "master_seed": (int, 0),
    },
    "output": {
        "csv": (str, ""),
    },
}
_SECTIONS = ("scenario", "cameras", "correlation", "disruption", "optimizer",
             "experiment", "output")


def bundled_scenario(name):
    """Return the path of a scenario shipped with the package.

    :param name: File name without the ``.scenario`` suffix
    """
    path = os.path.join(SCENARIO_DIR, f"{name}.scenario")
    if not os.path.isfile(path):
        raise ScenarioNotFoundError(f"no bundled scenario named {name!r}")
    return path


def _parser():
    parser = configparser.ConfigParser(interpolation=None,
                                       delimiters=("=",),
                                       default_section="__defaults__")
    parser.optionxform = str
    return parser


def _convert(converter, raw):
    if converter == "floats":
        values = tuple(float(item) for item in raw.split(",") if item.strip())
        if not values:
            raise ValueError("empty list")
        return values
    if converter == "strategies":
        values = tuple(Strategy(item.strip()) for item in raw.split(",")
                       if item.strip())
        if not values:
            raise ValueError("empty list")
        return values
    return converter(raw.strip())


def _read_section(parser, section, problems):
    known = _SIMPLE_SECTIONS[section]
    values = {}
    present = parser[section] if parser.has_section(section) else {}
    for key in present:
        if key not in known:
            problems.append(f"[{section}] unknown key {key!r}")
    for key, (converter, default) in known.items():
        if key not in present:
            if default is _REQUIRED:
                problems.append(f"[{section}] missing required key {key!r}")
            values[key] = None if default is _REQUIRED else default
            continue
        try:
            values[key] = _convert(converter, present[key])
        except ValueError:
            problems.append(f"[{section}] {key} = {present[key]!r} is not a "
                            f"valid value")
            values[key] = None
    return values


def _check_theta(parser, problems):
    present = parser["experiment"] if parser.has_section("experiment") else {}
    if "theta" in present and "theta_fraction" in present:
        problems.append("[experiment] give either theta or theta_fraction, "
                        "not both")
    elif "theta" not in present and "theta_fraction" not in present:
        problems.append("[experiment] missing required key 'theta'")


def _read_cameras(parser, problems):
    if not parser.has_section("cameras") or not parser["cameras"]:
        problems.append("[cameras] at least one camera is required")
        return []

    cameras = {}
    found = len(problems)
    for key, raw in parser["cameras"].items():
        try:
            camera_id = int(key)
        except ValueError:
            problems.append(f"[cameras] {key!r} is not a camera index")
            continue
        try:
            fields = [float(item) for item in raw.split(",")]
            if len(fields) not in (1, 3):
                raise ValueError("expected resolution[, beta_a, beta_b]")
            avail = AvailabilityDist(*fields[1:])
            cameras[camera_id] = CameraSpec(camera_id, fields[0], avail)
        except ValueError as exception:
            problems.append(f"[cameras] {key} = {raw!r}: {exception}")

    ids = sorted(cameras)
    expected = list(range(len(parser["cameras"])))
    if len(problems) == found and ids != expected:
        problems.append(f"[cameras] camera ids must be 0..{len(expected) - 1}, "
                        f"got {ids}")
    return [cameras[camera_id] for camera_id in ids]


def _read_correlation(parser, size, problems):
    rho = np.eye(size)
    if not parser.has_section("correlation"):
        return rho

    for key, raw in parser["correlation"].items():
        try:
            i, j = (int(item) for item in key.split(","))
        except ValueError:
            problems.append(f"[correlation] {key!r} is not an 'i,j' pair")
            continue
        if not 0 <= i < j:
            problems.append(f"[correlation] {key!r} must name an upper-"
                            f"triangle pair (i < j)")
            continue
        if j >= size:
            problems.append(f"[correlation] {key!r} refers to a camera "
                            f"outside 0..{size - 1}")
            continue
        try:
            rho[i, j] = rho[j, i] = float(raw)
        except ValueError:
            problems.append(f"[correlation] {key} = {raw!r} is not a number")
    return rho


def _correlation_matrix(rho, problems):
    structural = correlation_problems(rho)
    if structural:
        problems.extend(f"[correlation] {problem}" for problem in structural)
        return None
    try:
        check_psd(rho)
    except NotPositiveSemidefiniteError as exception:
        problems.append(f"[correlation] {exception}")
        return None
    return CorrelationMatrix(rho)


def _parse(path):
    if not os.path.isfile(path):
        raise ScenarioNotFoundError(path)
    parser = _parser()
    try:
        with open(path, encoding="utf-8") as scenario_file:
            parser.read_file(scenario_file)
    except OSError as exception:
        raise ScenarioNotFoundError(f"{path}: {exception}") from exception
    except (configparser.Error, UnicodeDecodeError) as exception:
        raise ScenarioParseError(f"{path}: {exception}") from exception
    return parser


def load_scenario(path, settings=None):
    """Read and validate a scenario file.

    :param path: Path to the scenario file
    :param settings: flask.Config supplying defaults; created when omitted
    :returns: ScenarioConfig
    :raises ScenarioNotFoundError: File does not exist
    :raises ScenarioParseError: File is not valid INI
    :raises ScenarioValidationError: One or more invalid entries
    """
    settings = settings if settings is not None else create_config()
    parser = _parse(path)

    problems = [f"unknown section [{section}]"
                for section in parser.sections() if section not in _SECTIONS]
    header = _read_section(parser, "scenario", problems)
    if header["schema_version"] not in (None, SCHEMA_VERSION):
        problems.append(f"[scenario] schema_version {header['schema_version']}"
                        f" is not supported (expected {SCHEMA_VERSION})")
    cameras = _read_cameras(parser, problems)
    rho = _read_correlation(parser, len(cameras), problems)
    disruption = _read_section(parser, "disruption", problems)
    optimizer = _read_section(parser, "optimizer", problems)
    experiment = _read_section(parser, "experiment", problems)
    _check_theta(parser, problems)
    output = _read_section(parser, "output", problems)
    if problems:
        raise ScenarioValidationError(problems)

    spatial_rho = _correlation_matrix(rho, problems)
    ga = disruption_cfg = None
    try:
        ga = GaConfig.from_settings(
            settings, **{key: value for key, value in optimizer.items()
                         if value is not None})
    except ValueError as exception:
        problems.append(f"[optimizer] {exception}")
    if spatial_rho is not None:
        try:
            disruption_cfg = DisruptionProcessConfig.for_cameras(
                cameras, spatial_rho, **disruption)
        except ValueError as exception:
            problems.append(f"[disruption] {exception}")
    if problems:
        raise ScenarioValidationError(problems)

    threshold = experiment.pop("quality_threshold")
    if threshold is None:
        threshold = settings["QUALITY_FRACTION"] * sum(
            camera.resolution * beta_mean(camera.avail) for camera in cameras)
    if experiment["theta"] is None:
        experiment["theta"] = 0.0
    if experiment["min_views"] is None:
        experiment["min_views"] = settings["MIN_VIEWS"]

    csv_path = output["csv"]
    if csv_path and not os.path.isabs(csv_path):
        csv_path = os.path.join(os.path.dirname(os.path.abspath(path)),
                                csv_path)

    try:
        cfg = ScenarioConfig(
            cameras=cameras,
            disruption=disruption_cfg,
            quality_threshold=threshold,
            ga=ga,
            name=header["name"] or os.path.splitext(
                os.path.basename(path))[0],
            output_csv=csv_path,
            **experiment,
        )
    except ScenarioValidationError as exception:
        raise ScenarioValidationError(
            [f"[experiment] {problem}" for problem in exception.problems]
        ) from exception
    LOGGER.debug("Loaded scenario %r from %s: %d cameras", cfg.name, path,
                 len(cfg.cameras))
    return cfg


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def scenario_text(cfg):
    """Serialize ``cfg`` in scenario file syntax.

    Loading the text again gives an equivalent ScenarioConfig.
    """
    parser = _parser()
    parser["scenario"] = {"schema_version": str(SCHEMA_VERSION),
                          "name": cfg.name}
    parser["cameras"] = {
        str(camera.id): ", ".join(_format(float(value)) for value in (
            camera.resolution, camera.avail.alpha_shape,
            camera.avail.beta_shape))
        for camera in cfg.cameras
    }
    rho = cfg.disruption.spatial_rho.rho
    parser["correlation"] = {
        f"{i},{j}": _format(float(rho[i, j]))
        for i in range(rho.shape[0]) for j in range(i + 1, rho.shape[0])
        if rho[i, j] != 0.0
    }
    parser["disruption"] = {
        "temporal_phi": _format(float(cfg.disruption.temporal_phi)),
        "rng_seed": str(cfg.disruption.rng_seed),
    }
    parser["optimizer"] = {
        item.name: _format(getattr(cfg.ga, item.name))
        for item in dataclasses.fields(cfg.ga)
        if getattr(cfg.ga, item.name) is not None
    }
    parser["experiment"] = {
        "psi_values": ", ".join(_format(psi) for psi in cfg.psi_values),
        "quality_threshold": _format(float(cfg.quality_threshold)),
        "min_views": str(cfg.min_views),
        "epochs": str(cfg.epochs),
        "replications": str(cfg.replications),
        "selection_mode": cfg.selection_mode.value,
        "strategies": ", ".join(item.value for item in cfg.strategies),
        "master_seed": str(cfg.master_seed),
    }
    if cfg.theta_fraction is None:
        parser["experiment"]["theta"] = _format(float(cfg.theta))
    else:
        parser["experiment"]["theta_fraction"] = _format(
            float(cfg.theta_fraction))
    if cfg.output_csv:
        parser["output"] = {"csv": cfg.output_csv}

    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def write_scenario(cfg, path):
    """Write ``cfg`` to ``path`` as a scenario file."""
    with open(path, "w", encoding="utf-8") as scenario_file:
        scenario_file.write(scenario_text(cfg))


def block_correlation(size, blocks, intra, inter):
    """Correlation matrix of ``blocks`` contiguous camera groups.

    Cameras in the same group correlate with ``intra``, cameras in
    different groups with ``inter``.

    :returns: CorrelationMatrix
    """
    if not 1 <= blocks <= size:
        raise ValueError(f"blocks must be in [1, {size}], got {blocks}")
    membership = np.arange(size) * blocks // size
    same = membership[:, None] == membership[None, :]
    rho = np.where(same, intra, inter)
    np.fill_diagonal(rho, 1.0)
    return CorrelationMatrix(rho)


def generate_scenario(cameras=7, blocks=2, intra=0.8, inter=0.1,
                      res_min=100.0, res_max=300.0, seed=0, settings=None,
                      theta_share=0.35, **experiment):
    """Build a random block-correlated scenario.

    Resolutions are drawn uniformly from ``[res_min, res_max]`` and
    sorted ascending. Availability marginals are Beta(2, 2).

    :param theta_share: Absolute theta as a share of the expected total
        resolution
    :param experiment: Overrides for ScenarioConfig fields
    :returns: ScenarioConfig
    """
    settings = settings if settings is not None else create_config()
    if not 0 < res_min <= res_max:
        raise ValueError("resolutions must satisfy 0 < res_min <= res_max")
    rng = np.random.default_rng(seed)
    resolutions = np.sort(np.round(rng.uniform(res_min, res_max, cameras), 1))
    specs = [CameraSpec(index, float(value))
             for index, value in enumerate(resolutions)]
    rho = block_correlation(cameras, blocks, intra, inter)
    expected_total = sum(spec.resolution * beta_mean(spec.avail)
                         for spec in specs)

    half = max(1, cameras // 2)
    values = dict(
        cameras=specs,
        disruption=DisruptionProcessConfig.for_cameras(specs, rho),
        theta=round(theta_share * expected_total, 6),
        psi_values=sorted({float(min(cameras, max(1, half + step)))
                           for step in (-1, 0, 1)}),
        quality_threshold=round(
            settings["QUALITY_FRACTION"] * expected_total, 6),
        min_views=settings["MIN_VIEWS"],
        ga=GaConfig.from_settings(settings),
        master_seed=seed,
        name=f"generated {cameras} cameras, {blocks} blocks",
    )
    values.update(experiment)
    return ScenarioConfig(**values)
