"""Cameras, disruption statistics and the moments fed to the optimizer.

A camera ``i`` delivers its resolution ``R_i`` with a random availability
probability ``p_i ~ Beta(a_i, b_i)`` and nothing otherwise. The optimizer
consumes the expected delivered resolution ``R_i E[p_i]`` and the
covariance ``R_i R_j sigma_i sigma_j rho_ij``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from camera_portfolio.errors import (DimensionMismatchError,
                                     NotPositiveSemidefiniteError)

LOGGER = logging.getLogger(__name__)

#: Relative eigenvalue floor used by the PSD check.
PSD_TOLERANCE = 1e-9


def _frozen(values):
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class AvailabilityDist:
    """Beta distribution of a camera's availability probability."""

    alpha_shape: float = 2.0
    beta_shape: float = 2.0

    def __post_init__(self):
        for name in ("alpha_shape", "beta_shape"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive number, "
                                 f"got {value!r}")

    def mean(self):
        """Return the mean of the distribution."""
        return beta_mean(self)

    def std(self):
        """Return the standard deviation of the distribution."""
        return beta_std(self)


def beta_mean(dist):
    """Return ``a / (a + b)``.

    :param dist: AvailabilityDist
    :returns: Mean availability probability
    """
    a, b = dist.alpha_shape, dist.beta_shape
    return a / (a + b)


def beta_std(dist):
    """Return the standard deviation of a Beta(a, b) variable.

    :param dist: AvailabilityDist
    :returns: ``sqrt(ab / ((a+b)^2 (a+b+1)))``
    """
    a, b = dist.alpha_shape, dist.beta_shape
    total = a + b
    return math.sqrt(a * b / (total * total * (total + 1.0)))


@dataclass(frozen=True)
class CameraSpec:
    """One camera: index, resolution and availability distribution."""

    id: int
    resolution: float
    avail: AvailabilityDist = field(default_factory=AvailabilityDist)

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"camera id must be >= 0, got {self.id}")
        if not math.isfinite(self.resolution) or self.resolution <= 0:
            raise ValueError(f"camera {self.id}: resolution must be "
                             f"positive, got {self.resolution!r}")


def check_camera_ids(cameras):
    """Raise ValueError unless camera ids are exactly ``0 .. N-1`` in order.

    :param cameras: Sequence of CameraSpec
    """
    ids = [camera.id for camera in cameras]
    if ids != list(range(len(ids))):
        raise ValueError(f"camera ids must be 0..{len(ids) - 1} in order, "
                         f"got {ids}")


def min_eigenvalue(matrix):
    """Return the smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(matrix)[0])


def check_psd(matrix, tolerance=PSD_TOLERANCE):
    """Raise unless ``matrix`` is positive semidefinite.

    The floor is ``-tolerance * largest eigenvalue`` so the check scales
    with the magnitude of the matrix.

    :param matrix: Symmetric square array
    :param tolerance: Relative eigenvalue floor
    :returns: The smallest eigenvalue
    """
    eigenvalues = np.linalg.eigvalsh(np.asarray(matrix, dtype=float))
    smallest, largest = float(eigenvalues[0]), float(eigenvalues[-1])
    if smallest < -tolerance * max(largest, 0.0):
        raise NotPositiveSemidefiniteError(smallest)
    return smallest


def correlation_problems(rho):
    """List the structural problems of a candidate correlation matrix.

    Positive semidefiniteness is not checked here; see :func:`check_psd`.

    :param rho: Square array
    :returns: List of messages, empty when the structure is valid
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return [f"correlation matrix must be square, got shape {rho.shape}"]

    problems = []
    size = rho.shape[0]
    for i in range(size):
        if rho[i, i] != 1.0:
            problems.append(f"rho[{i},{i}] must be 1, got {rho[i, i]:g}")
        for j in range(i + 1, size):
            if rho[i, j] != rho[j, i]:
                problems.append(f"rho[{i},{j}] != rho[{j},{i}]")
            if not -1.0 <= rho[i, j] <= 1.0:
                problems.append(f"rho[{i},{j}] = {rho[i, j]:g} is outside "
                                f"[-1, 1]")
    return problems


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric, unit-diagonal, PSD matrix of pairwise correlations."""

    rho: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.rho)
        problems = correlation_problems(rho)
        if problems:
            raise ValueError("; ".join(problems))
        check_psd(rho)
        object.__setattr__(self, "rho", rho)

    @property
    def n(self):
        """Dimension of the matrix."""
        return self.rho.shape[0]

    @classmethod
    def identity(cls, size):
        """Return the uncorrelated matrix of dimension ``size``."""
        return cls(np.eye(size))

    @classmethod
    def from_upper(cls, size, entries):
        """Build a matrix from upper-triangle entries.

        :param size: Dimension
        :param entries: Mapping ``(i, j) -> rho`` with ``i < j``; missing
                        pairs are zero
        """
        rho = np.eye(size)
        for (i, j), value in entries.items():
            rho[i, j] = rho[j, i] = value
        return cls(rho)

    def scaled(self, factor):
        """Return a copy with every off-diagonal entry multiplied by
        ``factor``. The result is validated again, so scaling can fail.
        """
        rho = np.array(self.rho) * factor
        np.fill_diagonal(rho, 1.0)
        return CorrelationMatrix(rho)


@dataclass(frozen=True, eq=False)
class PortfolioInputs:
    """First and second moments of delivered resolution plus Θ and Ψ."""

    expected_res: np.ndarray
    cov: np.ndarray
    theta: float
    psi: float

    def __post_init__(self):
        expected_res = _frozen(self.expected_res)
        cov = _frozen(self.cov)
        size = expected_res.shape[0]
        if expected_res.ndim != 1 or cov.shape != (size, size):
            raise DimensionMismatchError(
                f"expected_res has shape {expected_res.shape}, cov has "
                f"shape {cov.shape}"
            )
        if np.any(expected_res < 0):
            raise ValueError("expected resolutions must be >= 0")
        if not np.array_equal(cov, cov.T):
            raise ValueError("covariance matrix must be symmetric")
        if np.any(np.diag(cov) < 0):
            raise ValueError("covariance diagonal must be >= 0")
        check_psd(cov)
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.psi <= 0:
            raise ValueError(f"psi must be > 0, got {self.psi}")
        if self.theta > expected_res.sum():
            LOGGER.warning(
                "Quality threshold %g exceeds total expected resolution %g; "
                "instance is infeasible", self.theta, expected_res.sum()
            )
        object.__setattr__(self, "expected_res", expected_res)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self):
        """Number of cameras."""
        return self.expected_res.shape[0]

    def with_theta(self, theta):
        """Return a copy with another quality threshold."""
        return PortfolioInputs(self.expected_res, self.cov, theta, self.psi)


def expected_resolution(camera):
    """Return ``R_i * E[p_i]``.

    :param camera: CameraSpec
    """
    return camera.resolution * beta_mean(camera.avail)


def resolution_covariance(camera_i, camera_j, rho_ij):
    """Return ``R_i R_j sigma_i sigma_j rho_ij``.

    :param camera_i: CameraSpec
    :param camera_j: CameraSpec
    :param rho_ij: Correlation of the availability probabilities
    """
    if not -1.0 <= rho_ij <= 1.0:
        raise ValueError(f"rho_ij must be in [-1, 1], got {rho_ij}")
    return (camera_i.resolution * camera_j.resolution
            * beta_std(camera_i.avail) * beta_std(camera_j.avail) * rho_ij)


def _scales(cameras):
    return np.array([camera.resolution * beta_std(camera.avail)
                     for camera in cameras])


def _symmetrize(matrix):
    upper = np.triu(matrix)
    return upper + np.triu(matrix, 1).T


def build_portfolio_inputs(cameras, rho, theta, psi):
    """Assemble the optimizer inputs for a camera set.

    :param cameras: Sequence of CameraSpec with ids ``0 .. N-1``
    :param rho: CorrelationMatrix of dimension N
    :param theta: Quality threshold Θ (>= 0)
    :param psi: Camera budget Ψ (>= 1)
    :returns: PortfolioInputs
    """
    check_camera_ids(cameras)
    if rho.n != len(cameras):
        raise DimensionMismatchError(
            f"{len(cameras)} cameras but correlation matrix is "
            f"{rho.n}x{rho.n}"
        )
    if psi < 1:
        raise ValueError(f"psi must be >= 1, got {psi}")

    scales = _scales(cameras)
    cov = _symmetrize(scales[:, None] * rho.rho * scales[None, :])
    expected_res = [expected_resolution(camera) for camera in cameras]

    return PortfolioInputs(expected_res, cov, float(theta), float(psi))


def delivered_resolution_covariance(cameras, rho):
    """Covariance of the on/off delivered resolution.

    Off-diagonal entries equal the optimizer's covariance because outages
    are conditionally independent given the availability probabilities.
    The diagonal adds the Bernoulli noise: ``Var = R_i^2 m_i (1 - m_i)``.
    Used for reporting only.

    :param cameras: Sequence of CameraSpec
    :param rho: CorrelationMatrix
    :returns: N x N array
    """
    scales = _scales(cameras)
    cov = _symmetrize(scales[:, None] * rho.rho * scales[None, :])
    for i, camera in enumerate(cameras):
        mean = beta_mean(camera.avail)
        cov[i, i] = camera.resolution ** 2 * mean * (1.0 - mean)
    return cov
