"""Spatio-temporally correlated camera outages.

A latent Gaussian field ``z`` follows a stationary AR(1) process whose
innovations carry the spatial correlation. Each epoch the field is mapped
through a Gaussian copula onto the configured Beta marginals, giving the
availability probabilities ``p``; cameras then go up or down by
independent Bernoulli draws given ``p``.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from camera_portfolio.errors import DimensionMismatchError
from camera_portfolio.model import AvailabilityDist, check_psd

LOGGER = logging.getLogger(__name__)

_P_FLOOR = np.nextafter(0.0, 1.0)
_P_CEILING = np.nextafter(1.0, 0.0)


@dataclass(frozen=True, eq=False)
class DisruptionProcessConfig:
    """Parameters of the outage process."""

    spatial_rho: object
    temporal_phi: float = 0.0
    marginals: tuple = ()
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.temporal_phi < 1.0:
            raise ValueError(f"temporal_phi must be in [0, 1), got "
                             f"{self.temporal_phi}")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")
        marginals = tuple(self.marginals) or tuple(
            AvailabilityDist() for _ in range(self.spatial_rho.n))
        if len(marginals) != self.spatial_rho.n:
            raise DimensionMismatchError(
                f"{len(marginals)} marginals for a "
                f"{self.spatial_rho.n}x{self.spatial_rho.n} correlation matrix"
            )
        object.__setattr__(self, "marginals", marginals)

    @property
    def n(self):
        """Number of cameras."""
        return self.spatial_rho.n

    @classmethod
    def for_cameras(cls, cameras, spatial_rho, temporal_phi=0.0, rng_seed=0):
        """Build a config whose marginals are the cameras' availability."""
        return cls(spatial_rho, temporal_phi,
                   tuple(camera.avail for camera in cameras), rng_seed)


@dataclass(frozen=True, eq=False)
class LatentState:
    """Current latent Gaussian field and the epoch it belongs to."""

    z: np.ndarray
    epoch: int = 0


@dataclass(frozen=True, eq=False)
class AvailabilityOutcome:
    """One epoch of availability: probabilities, up flags and the
    resolution each camera delivered."""

    p: np.ndarray
    up: np.ndarray
    delivered_res: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Many consecutive epochs as arrays of shape (epochs, N)."""

    z: np.ndarray
    p: np.ndarray
    up: np.ndarray
    final_state: LatentState


def factor_correlation(rho):
    """Return a lower-triangular ``L`` with ``L @ L.T == rho``.

    Cholesky is tried first. Rank-deficient matrices fall back to an
    eigendecomposition whose square-root factor is brought back to lower
    triangular form with a QR step.

    :param rho: CorrelationMatrix or symmetric PSD array
    :returns: N x N array
    """
    matrix = np.asarray(getattr(rho, "rho", rho), dtype=float)
    check_psd(matrix)
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        LOGGER.debug("Cholesky failed, using eigen factor")

    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    _, upper = np.linalg.qr(root.T)
    signs = np.where(np.diag(upper) < 0, -1.0, 1.0)
    return (signs[:, None] * upper).T


_cached_factor = functools.lru_cache(maxsize=64)(factor_correlation)


def replication_streams(cfg, replication_index, master_seed=0):
    """Return independent latent and outcome generators for a replication.

    The streams depend only on ``(master_seed, cfg.rng_seed,
    replication_index)``, so adding replications leaves earlier ones
    untouched.

    :returns: Tuple ``(latent_rng, outcome_rng)``
    """
    sequence = np.random.SeedSequence(
        master_seed, spawn_key=(0, cfg.rng_seed, replication_index))
    latent, outcome = sequence.spawn(2)
    return np.random.default_rng(latent), np.random.default_rng(outcome)


class DisruptionProcess:
    """Outage process bound to a camera set.

    :param cfg: DisruptionProcessConfig
    :param resolutions: Per-camera resolution ``R_i``
    """

    def __init__(self, cfg, resolutions):
        self.cfg = cfg
        self.resolutions = np.asarray(resolutions, dtype=float)
        if self.resolutions.shape != (cfg.n,):
            raise DimensionMismatchError(
                f"{self.resolutions.shape[0]} resolutions for {cfg.n} "
                f"cameras"
            )
        self.factor = _cached_factor(cfg.spatial_rho)
        self.alpha_shapes = np.array([m.alpha_shape for m in cfg.marginals])
        self.beta_shapes = np.array([m.beta_shape for m in cfg.marginals])
        self.innovation_scale = math.sqrt(1.0 - cfg.temporal_phi ** 2)

    @classmethod
    def for_cameras(cls, cfg, cameras):
        """Bind ``cfg`` to a sequence of CameraSpec."""
        return cls(cfg, [camera.resolution for camera in cameras])

    def _correlate(self, shocks):
        return shocks @ self.factor.T

    def initial_state(self, rng):
        """Draw the latent field from its stationary law N(0, rho)."""
        shocks = rng.standard_normal((1, self.cfg.n))
        return LatentState(self._correlate(shocks)[0], 0)

    def step(self, state, rng):
        """Advance the latent field by one epoch."""
        if state.z.shape != (self.cfg.n,):
            raise DimensionMismatchError(
                f"state has {state.z.shape[0]} entries, process has "
                f"{self.cfg.n}"
            )
        shocks = self._correlate(rng.standard_normal((1, self.cfg.n)))[0]
        z = self.cfg.temporal_phi * state.z + self.innovation_scale * shocks
        return LatentState(z, state.epoch + 1)

    def probabilities(self, z):
        """Map latent values onto the Beta marginals (copula transform)."""
        p = special.betaincinv(self.alpha_shapes, self.beta_shapes,
                               special.ndtr(z))
        return np.clip(p, _P_FLOOR, _P_CEILING)

    def realize(self, state, rng):
        """Draw this epoch's outages from the latent field."""
        p = self.probabilities(state.z)
        up = rng.random((1, self.cfg.n))[0] < p
        return AvailabilityOutcome(p, up, np.where(up, self.resolutions, 0.0))

    def trajectory(self, state, epochs, latent_rng, outcome_rng):
        """Run ``epochs`` consecutive step/realize pairs at once.

        Consumes the two generators exactly like ``epochs`` calls of
        :meth:`step` and :meth:`realize` would.

        :returns: Trajectory
        """
        shocks = self._correlate(latent_rng.standard_normal((epochs,
                                                             self.cfg.n)))
        phi = self.cfg.temporal_phi
        if phi == 0.0:
            z = self.innovation_scale * shocks
        else:
            z = np.empty_like(shocks)
            previous = state.z
            for epoch in range(epochs):
                previous = phi * previous + self.innovation_scale * shocks[epoch]
                z[epoch] = previous
        p = self.probabilities(z)
        up = outcome_rng.random((epochs, self.cfg.n)) < p
        final = LatentState(z[-1].copy(), state.epoch + epochs)
        return Trajectory(z, p, up, final)


def step(state, cfg, rng):
    """Advance ``state`` by one epoch: ``z' = phi z + sqrt(1-phi^2) L eps``.

    :param state: LatentState
    :param cfg: DisruptionProcessConfig
    :param rng: numpy Generator
    :returns: LatentState
    """
    return DisruptionProcess(cfg, np.ones(cfg.n)).step(state, rng)


def realize(state, cfg, cameras, rng):
    """Turn the latent field into availability probabilities and outages.

    :param state: LatentState
    :param cfg: DisruptionProcessConfig
    :param cameras: Sequence of CameraSpec
    :param rng: numpy Generator
    :returns: AvailabilityOutcome
    """
    return DisruptionProcess.for_cameras(cfg, cameras).realize(state, rng)
