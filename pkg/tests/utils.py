"""Testing utilities"""

import numpy as np

from camera_portfolio.model import CorrelationMatrix

SMALL_OPTIMIZER = {
    "population_size": 30,
    "max_generations": 60,
    "rng_seed": 3,
}


def random_correlation(size, rng):
    """Return a random full-rank CorrelationMatrix.

    :param size: Dimension
    :param rng: numpy Generator
    """
    factor = rng.standard_normal((size, size + 2))
    covariance = factor @ factor.T
    covariance = (covariance + covariance.T) / 2.0
    scale = np.sqrt(np.diag(covariance))
    rho = np.clip(covariance / np.outer(scale, scale), -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return CorrelationMatrix(rho)


def scenario_text(resolutions=(100, 150, 200, 250), correlation=None,
                  theta=120, psi_values="2, 3", optimizer=None,
                  experiment=None, extra=""):
    """Build the text of a scenario file.

    Defaults to four cameras in two correlated pairs, a small optimizer and
    a short experiment.

    :param resolutions: Per-camera resolution, or full ``[cameras]`` values
    :param correlation: Mapping ``"i,j" -> rho``
    :param optimizer: ``[optimizer]`` overrides
    :param experiment: ``[experiment]`` overrides
    :param extra: Text appended verbatim
    """
    if correlation is None:
        correlation = {"0,1": 0.7, "2,3": 0.7, "0,2": 0.1}
    optimizer = {**SMALL_OPTIMIZER, **(optimizer or {})}
    experiment = {
        "theta": theta,
        "psi_values": psi_values,
        "epochs": 300,
        "replications": 2,
        "strategies": "portfolio, baseline_top_expected",
        "master_seed": 5,
        **(experiment or {}),
    }

    lines = ["[scenario]", "schema_version = 1", "", "[cameras]"]
    lines += [f"{index} = {value}" for index, value in enumerate(resolutions)]
    lines += ["", "[correlation]"]
    lines += [f"{key} = {value}" for key, value in correlation.items()]
    lines += ["", "[optimizer]"]
    lines += [f"{key} = {value}" for key, value in optimizer.items()]
    lines += ["", "[experiment]"]
    lines += [f"{key} = {value}" for key, value in experiment.items()
              if value is not None]
    return "\n".join(lines) + "\n" + extra
