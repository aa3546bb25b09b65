"""Monte Carlo comparison of camera selection strategies.

Each (strategy, psi, replication) solves for a selection vector once,
then runs ``epochs`` disruption epochs. An epoch succeeds when the
delivered resolution reaches the quality threshold with at least
``min_views`` cameras delivering. All strategies of one replication see
the same disruption draws.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from camera_portfolio import default_config
from camera_portfolio.disruption import (DisruptionProcess,
                                         DisruptionProcessConfig,
                                         replication_streams)
from camera_portfolio.errors import (DimensionMismatchError, EmptyRecordsError,
                                     ScenarioValidationError)
from camera_portfolio.model import (beta_mean, build_portfolio_inputs,
                                    check_camera_ids)
from camera_portfolio.optimizer import (GaConfig, baseline_top_expected,
                                        ga_solve, selection_size,
                                        uniform_random_baseline)

LOGGER = logging.getLogger(__name__)

WILSON_Z = float(stats.norm.ppf(0.975))

SWEEP_PARAMETERS = ("theta", "temporal_phi", "correlation_scale",
                    "quality_threshold")


class Strategy(enum.Enum):
    """Camera selection strategies under comparison."""

    PORTFOLIO = "portfolio"
    BASELINE_TOP_EXPECTED = "baseline_top_expected"
    UNIFORM_RANDOM = "uniform_random"

    @property
    def code(self):
        """Stable integer used in seed derivation."""
        return list(Strategy).index(self)


class SelectionMode(enum.Enum):
    """How a selection vector becomes the set of cameras used per epoch."""

    PROBABILISTIC = "prob"
    TOP = "top"


def default_quality_threshold(cameras, fraction=default_config.QUALITY_FRACTION):
    """Return ``fraction`` of the expected total resolution of all cameras."""
    return fraction * sum(camera.resolution * beta_mean(camera.avail)
                          for camera in cameras)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything one comparison experiment needs."""

    cameras: tuple
    disruption: DisruptionProcessConfig
    theta: float
    psi_values: tuple
    quality_threshold: float
    epochs: int = 10000
    replications: int = 20
    selection_mode: SelectionMode = SelectionMode.PROBABILISTIC
    strategies: tuple = (Strategy.PORTFOLIO, Strategy.BASELINE_TOP_EXPECTED)
    master_seed: int = 0
    min_views: int = default_config.MIN_VIEWS
    ga: GaConfig = dataclasses.field(default_factory=GaConfig)
    name: str = ""
    output_csv: str = ""
    theta_fraction: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        object.__setattr__(self, "psi_values",
                           tuple(float(psi) for psi in self.psi_values))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        check_camera_ids(self.cameras)

        size = len(self.cameras)
        problems = []
        if self.disruption.n != size:
            problems.append(f"disruption process covers {self.disruption.n} "
                            f"cameras, scenario has {size}")
        if self.theta < 0:
            problems.append("theta must be >= 0")
        if self.theta_fraction is not None and \
                not 0.0 <= self.theta_fraction <= 1.0:
            problems.append("theta_fraction must be in [0, 1]")
        if not self.psi_values:
            problems.append("psi_values must not be empty")
        for psi in self.psi_values:
            if not 1.0 <= psi <= size:
                problems.append(f"psi {psi:g} must be in [1, {size}]")
        if self.quality_threshold < 0:
            problems.append("quality_threshold must be >= 0")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if self.replications < 1:
            problems.append("replications must be >= 1")
        if self.min_views < 0:
            problems.append("min_views must be >= 0")
        if not self.strategies:
            problems.append("strategies must not be empty")
        if len(set(self.strategies)) != len(self.strategies):
            problems.append("strategies must not repeat")
        if not 0 <= self.master_seed < 2 ** 64:
            problems.append("master_seed must be a 64-bit unsigned integer")
        if problems:
            raise ScenarioValidationError(problems)

    @property
    def resolutions(self):
        """Per-camera resolution as an array."""
        return np.array([camera.resolution for camera in self.cameras])

    def theta_for(self, psi):
        """Quality floor used by the solvers at budget ``psi``.

        With ``theta_fraction`` set, the floor is that fraction of the
        expected quality of the ``floor(psi)`` cameras with the largest
        expected resolution, so it follows the budget.
        """
        if self.theta_fraction is None:
            return self.theta
        expected = np.sort([camera.resolution * beta_mean(camera.avail)
                            for camera in self.cameras])[::-1]
        return float(self.theta_fraction
                     * expected[:selection_size(psi, len(expected))].sum())

    def replace(self, **changes):
        """Return a copy with ``changes`` applied."""
        return dataclasses.replace(self, **changes)


def vary(cfg, param, value):
    """Return a copy of ``cfg`` with one sweep parameter changed.

    ``correlation_scale`` multiplies the off-diagonal correlations and
    revalidates the matrix, so it raises for scales that break PSD.

    :param cfg: ScenarioConfig
    :param param: One of SWEEP_PARAMETERS
    :param value: New value
    """
    if param == "theta":
        return cfg.replace(theta=value, theta_fraction=None)
    if param == "quality_threshold":
        return cfg.replace(quality_threshold=value)
    if param == "temporal_phi":
        return cfg.replace(disruption=dataclasses.replace(
            cfg.disruption, temporal_phi=value))
    if param == "correlation_scale":
        return cfg.replace(disruption=dataclasses.replace(
            cfg.disruption, spatial_rho=cfg.disruption.spatial_rho.scaled(value)))
    raise ValueError(f"unknown sweep parameter {param!r}; expected one of "
                     f"{', '.join(SWEEP_PARAMETERS)}")


@dataclass(frozen=True, eq=False)
class EpochRecord:
    """Outcome of one epoch for one strategy."""

    epoch: int
    selected: np.ndarray
    up: np.ndarray
    delivered_total: float
    views_delivered: int
    quality: float
    success: bool


def _score(selected, up, resolutions, min_views):
    delivering = selected & up
    delivered_total = delivering @ resolutions
    views = delivering.sum(axis=-1)
    quality = np.where(views >= min_views, delivered_total, 0.0)
    return delivered_total, views, quality


def quality_proxy(delivered, selected, min_views):
    """Return the delivered resolution of selected, working cameras, or 0
    when fewer than ``min_views`` of them deliver.

    :param delivered: AvailabilityOutcome
    :param selected: Boolean array of shape (N,)
    :param min_views: Minimum number of delivering cameras
    """
    selected = np.asarray(selected, dtype=bool)
    if selected.shape != delivered.up.shape:
        raise DimensionMismatchError(
            f"selection has {selected.shape[0]} entries, outcome has "
            f"{delivered.up.shape[0]}"
        )
    delivering = selected & delivered.up
    if delivering.sum() < min_views:
        return 0.0
    return float(np.where(delivering, delivered.delivered_res, 0.0).sum())


def selection_marginals(alpha, psi):
    """Probability of each camera being used in a PROBABILISTIC epoch.

    Equal to ``alpha`` unless it sums to more than ``floor(psi)``, in which
    case it is scaled down to that sum.
    """
    alpha = np.asarray(getattr(alpha, "alpha", alpha), dtype=float)
    limit = selection_size(psi, alpha.shape[0])
    total = float(alpha.sum())
    if total > limit:
        return alpha * (limit / total)
    return alpha


def materialize_selections(alpha, mode, psi, rng, epochs):
    """Decide which cameras are used in each of ``epochs`` epochs.

    PROBABILISTIC mode uses systematic sampling: the marginals are laid
    end to end on ``[0, sum)`` and a camera is used when a point of the
    grid ``u, u + 1, u + 2, ...`` with ``u ~ U[0, 1)`` falls in its
    interval. Camera ``i`` is used with probability
    ``selection_marginals(alpha, psi)[i]`` and no epoch uses more than
    ``floor(psi)`` cameras.

    :param alpha: SelectionVector or array of probabilities
    :param mode: SelectionMode
    :param psi: Camera budget; at most ``floor(psi)`` cameras per epoch
    :param rng: numpy Generator (only PROBABILISTIC draws from it)
    :param epochs: Number of epochs
    :returns: Boolean array of shape (epochs, N)
    """
    alpha = np.asarray(getattr(alpha, "alpha", alpha), dtype=float)
    if mode is SelectionMode.PROBABILISTIC:
        marginals = selection_marginals(alpha, psi)
        edges = np.minimum(np.concatenate(([0.0], np.cumsum(marginals))),
                           selection_size(psi, alpha.shape[0]))
        offsets = rng.random(epochs)
        points_below = np.maximum(np.ceil(edges - offsets[:, None]), 0.0)
        return np.diff(points_below, axis=1) > 0
    chosen = np.zeros(alpha.shape[0], dtype=bool)
    order = np.argsort(-alpha, kind="stable")
    chosen[order[:selection_size(psi, alpha.shape[0])]] = True
    return np.broadcast_to(chosen, (epochs, alpha.shape[0])).copy()


def materialize_selection(alpha, mode, psi, rng):
    """Single-epoch form of :func:`materialize_selections`."""
    return materialize_selections(alpha, mode, psi, rng, 1)[0]


class EpochLog:
    """Epoch records of one replication, stored column-wise.

    Behaves as a read-only sequence of EpochRecord.

    :param selected: Boolean array (epochs, N)
    :param up: Boolean array (epochs, N)
    :param resolutions: Per-camera resolution
    :param threshold: Quality threshold of the success test
    :param min_views: Minimum delivering cameras of the success test
    :param selection: SelectionVector the epochs were materialized from
    """

    def __init__(self, selected, up, resolutions, threshold, min_views,
                 first_epoch=1, strategy=None, psi=None, objective=0.0,
                 feasible=True, realized_p_corr=None, selection=None):
        self.selected = np.asarray(selected, dtype=bool)
        self.up = np.asarray(up, dtype=bool)
        self.resolutions = np.asarray(resolutions, dtype=float)
        if self.selected.shape != self.up.shape or \
                self.selected.shape[-1] != self.resolutions.shape[0]:
            raise DimensionMismatchError(
                f"selected {self.selected.shape}, up {self.up.shape}, "
                f"{self.resolutions.shape[0]} resolutions"
            )
        self.threshold = float(threshold)
        self.min_views = int(min_views)
        self.first_epoch = first_epoch
        self.strategy = strategy
        self.psi = psi
        self.objective = objective
        self.feasible = feasible
        self.realized_p_corr = realized_p_corr
        self.selection = selection
        self.delivered_total, self.views_delivered, self.quality = _score(
            self.selected, self.up, self.resolutions, self.min_views)
        self.success = ((self.quality >= self.threshold)
                        & (self.views_delivered >= self.min_views))

    def __len__(self):
        return self.selected.shape[0]

    def __getitem__(self, index):
        if not -len(self) <= index < len(self):
            raise IndexError(index)
        index %= len(self)
        return EpochRecord(
            epoch=self.first_epoch + index,
            selected=self.selected[index],
            up=self.up[index],
            delivered_total=float(self.delivered_total[index]),
            views_delivered=int(self.views_delivered[index]),
            quality=float(self.quality[index]),
            success=bool(self.success[index]),
        )

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    def rescore(self, threshold=None, min_views=None):
        """Return the same epochs judged against another threshold."""
        return EpochLog(
            self.selected, self.up, self.resolutions,
            self.threshold if threshold is None else threshold,
            self.min_views if min_views is None else min_views,
            self.first_epoch, self.strategy, self.psi, self.objective,
            self.feasible, self.realized_p_corr, self.selection,
        )


def realized_p_correlation(p):
    """Pearson correlation matrix of realized availability probabilities.

    :param p: Array (epochs, N)
    """
    if p.shape[0] < 2:
        return np.eye(p.shape[1])
    return np.atleast_2d(np.corrcoef(p, rowvar=False))


def _strategy_seed(cfg, strategy, psi, replication_index):
    sequence = np.random.SeedSequence(
        cfg.master_seed,
        spawn_key=(1, strategy.code, int(round(psi * 1e6)),
                   replication_index, cfg.ga.rng_seed),
    )
    solver, selection = sequence.spawn(2)
    return (int(solver.generate_state(1, dtype=np.uint64)[0]),
            np.random.default_rng(selection))


def solve_strategy(cfg, strategy, psi, seed):
    """Compute the selection of ``strategy`` for budget ``psi``.

    :returns: Solution
    """
    inputs = build_portfolio_inputs(cfg.cameras, cfg.disruption.spatial_rho,
                                    cfg.theta_for(psi), psi)
    if strategy is Strategy.PORTFOLIO:
        return ga_solve(inputs, dataclasses.replace(cfg.ga, rng_seed=seed))
    if strategy is Strategy.BASELINE_TOP_EXPECTED:
        return baseline_top_expected(inputs)
    return uniform_random_baseline(inputs, seed)


def run_replication(cfg, strategy, psi, replication_index):
    """Simulate one replication of ``strategy`` at budget ``psi``.

    Deterministic in ``(cfg.master_seed, strategy, psi,
    replication_index)``.

    :returns: EpochLog with ``cfg.epochs`` records
    """
    seed, selection_rng = _strategy_seed(cfg, strategy, psi,
                                         replication_index)
    solution = solve_strategy(cfg, strategy, psi, seed)
    if not solution.feasible:
        LOGGER.warning("%s selection for psi=%g (replication %d) is "
                       "infeasible; continuing with best effort",
                       strategy.value, psi, replication_index)

    latent_rng, outcome_rng = replication_streams(
        cfg.disruption, replication_index, cfg.master_seed)
    process = DisruptionProcess.for_cameras(cfg.disruption, cfg.cameras)
    state = process.initial_state(latent_rng)
    trajectory = process.trajectory(state, cfg.epochs, latent_rng,
                                    outcome_rng)
    selected = materialize_selections(solution.selection, cfg.selection_mode,
                                      psi, selection_rng, cfg.epochs)

    return EpochLog(
        selected, trajectory.up, cfg.resolutions, cfg.quality_threshold,
        cfg.min_views, first_epoch=state.epoch + 1, strategy=strategy,
        psi=psi, objective=solution.objective, feasible=solution.feasible,
        realized_p_corr=realized_p_correlation(trajectory.p),
        selection=solution.selection,
    )


def wilson_interval(successes, total, z=WILSON_Z):
    """Wilson score interval for a binomial proportion.

    :returns: Tuple ``(low, high)``
    """
    if total <= 0:
        raise EmptyRecordsError("no trials")
    proportion = successes / total
    spread = z * z / total
    center = (proportion + spread / 2.0) / (1.0 + spread)
    half = (z * math.sqrt(proportion * (1.0 - proportion) / total
                          + spread / (4.0 * total))
            / (1.0 + spread))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class RunStats:
    """Aggregated statistics of one (strategy, psi) cell."""

    strategy: Strategy
    psi: float
    mean_quality: float
    std_quality: float
    reliability: float
    epochs_total: int
    ci95_reliability: tuple
    successes: int = 0
    objective: float = 0.0

    @property
    def half_width(self):
        """Half the width of the Wilson interval."""
        low, high = self.ci95_reliability
        return (high - low) / 2.0


def aggregate(logs, strategy=None, psi=None):
    """Fold the epoch logs of one (strategy, psi) cell into RunStats.

    :param logs: Sequence of EpochLog, or a flat sequence of EpochRecord
    :param strategy: Strategy; taken from the logs when omitted
    :param psi: Budget; taken from the logs when omitted
    :returns: RunStats
    """
    logs = list(logs)
    if logs and isinstance(logs[0], EpochRecord):
        quality = np.array([record.quality for record in logs])
        successes = sum(1 for record in logs if record.success)
        objective = 0.0
    else:
        logs = [log for log in logs if len(log)]
        quality = np.concatenate([log.quality for log in logs] or
                                 [np.empty(0)])
        successes = int(sum(int(log.success.sum()) for log in logs))
        objective = float(np.mean([log.objective for log in logs])) \
            if logs else 0.0
    total = quality.shape[0]
    if not total:
        raise EmptyRecordsError("aggregate needs at least one epoch record")

    return RunStats(
        strategy=strategy if strategy is not None else getattr(
            logs[0], "strategy", None),
        psi=psi if psi is not None else getattr(logs[0], "psi", None),
        mean_quality=float(quality.mean()),
        std_quality=float(quality.std()),
        reliability=successes / total,
        epochs_total=total,
        ci95_reliability=wilson_interval(successes, total),
        successes=successes,
        objective=objective,
    )


def _correlation_gap(cfg, logs):
    latent = cfg.disruption.spatial_rho.rho
    realized = np.mean([log.realized_p_corr for log in logs], axis=0)
    mask = ~np.eye(latent.shape[0], dtype=bool)
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(realized - latent)[mask]))


def compare_strategies(cfg, threads=1):
    """Run every strategy at every psi and aggregate the results.

    :param cfg: ScenarioConfig
    :param threads: Worker threads for the replications
    :returns: List of RunStats ordered by (psi, strategy name)
    """
    cells = sorted(
        ((psi, strategy) for psi in cfg.psi_values
         for strategy in cfg.strategies),
        key=lambda cell: (cell[0], cell[1].value),
    )
    tasks = [(psi, strategy, index) for psi, strategy in cells
             for index in range(cfg.replications)]

    def run(task):
        psi, strategy, index = task
        return run_replication(cfg, strategy, psi, index)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        logs = list(executor.map(run, tasks))

    table = []
    for position, (psi, strategy) in enumerate(cells):
        cell_logs = logs[position * cfg.replications:
                         (position + 1) * cfg.replications]
        table.append(aggregate(cell_logs, strategy, psi))
        LOGGER.info("%s psi=%g: reliability %.4f, realized correlation "
                    "differs from latent by up to %.3f", strategy.value, psi,
                    table[-1].reliability, _correlation_gap(cfg, cell_logs))
    return table


def empirical_resolution_covariance(logs):
    """Covariance of per-camera delivered resolution ``up_i R_i`` over the
    epochs of ``logs`` (population normalization).

    Compare with :func:`camera_portfolio.model.delivered_resolution_covariance`
    and the optimizer's covariance to see the Bernoulli gap.
    """
    delivered = np.concatenate([log.up * log.resolutions for log in logs])
    return np.atleast_2d(np.cov(delivered, rowvar=False, bias=True))


def analytic_mean_quality(alpha, cameras, mode, psi):
    """Expected delivered resolution ignoring the minimum-view cutoff.

    :returns: ``sum_i E[selected_i] R_i E[p_i]``
    """
    alpha = np.asarray(getattr(alpha, "alpha", alpha), dtype=float)
    if mode is SelectionMode.TOP:
        alpha = materialize_selections(alpha, mode, psi, None, 1)[0] * 1.0
    else:
        alpha = selection_marginals(alpha, psi)
    return float(sum(a * camera.resolution * beta_mean(camera.avail)
                     for a, camera in zip(alpha, cameras)))
