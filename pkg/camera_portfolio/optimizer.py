"""Camera selection solvers.

Minimize ``alpha' cov alpha`` subject to
``sum(alpha * E[R]) >= theta``, ``sum(alpha) <= psi`` and
``0 <= alpha <= 1``. The genetic algorithm is the production solver, the
grid oracle checks it on small instances and the two baselines are the
control strategies of the experiments.
"""
from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from camera_portfolio import default_config
from camera_portfolio.errors import (DimensionMismatchError,
                                     OracleTooLargeError)

LOGGER = logging.getLogger(__name__)

BUDGET_TOLERANCE = 1e-9
ORACLE_CHUNK = 1 << 16


class SolverKind(enum.Enum):
    """Which procedure produced a Solution."""

    GA = "ga"
    GRID_ORACLE = "grid_oracle"
    BASELINE_TOP_EXPECTED = "baseline_top_expected"
    UNIFORM_RANDOM = "uniform_random"


@dataclass(frozen=True, eq=False)
class SelectionVector:
    """Per-camera selection probabilities, each in [0, 1]."""

    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        if alpha.ndim != 1:
            raise ValueError("selection vector must be one-dimensional")
        if np.any(alpha < 0.0) or np.any(alpha > 1.0):
            raise ValueError(f"selection entries must be in [0, 1]: {alpha}")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    def __len__(self):
        return self.alpha.shape[0]


@dataclass(frozen=True)
class GaConfig:
    """Genetic algorithm hyperparameters.

    ``penalty_weight`` of None means ``penalty_factor`` times the largest
    variance of the instance. The mutation scale decays
    geometrically to ``mutation_scale * mutation_decay`` over the run.
    """

    population_size: int = default_config.GA_POPULATION_SIZE
    max_generations: int = default_config.GA_MAX_GENERATIONS
    crossover_rate: float = default_config.GA_CROSSOVER_RATE
    mutation_rate: float = default_config.GA_MUTATION_RATE
    mutation_scale: float = default_config.GA_MUTATION_SCALE
    mutation_decay: float = default_config.GA_MUTATION_DECAY
    elite_count: int = default_config.GA_ELITE_COUNT
    penalty_weight: float | None = None
    penalty_factor: float = default_config.GA_PENALTY_FACTOR
    rng_seed: int = 0

    def __post_init__(self):
        problems = []
        if self.population_size < 2:
            problems.append("population_size must be >= 2")
        if self.max_generations < 1:
            problems.append("max_generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must be in [0, 1]")
        if self.mutation_scale <= 0:
            problems.append("mutation_scale must be > 0")
        if not 0.0 < self.mutation_decay <= 1.0:
            problems.append("mutation_decay must be in (0, 1]")
        if not 0 <= self.elite_count < self.population_size:
            problems.append("elite_count must be in [0, population_size)")
        if self.penalty_weight is not None and self.penalty_weight <= 0:
            problems.append("penalty_weight must be > 0")
        if self.penalty_factor <= 0:
            problems.append("penalty_factor must be > 0")
        if not 0 <= self.rng_seed < 2 ** 64:
            problems.append("rng_seed must be a 64-bit unsigned integer")
        if problems:
            raise ValueError("; ".join(problems))

    @classmethod
    def from_settings(cls, settings, **overrides):
        """Build a config from ``GA_*`` keys of a settings mapping.

        :param settings: flask.Config (or any mapping)
        :param overrides: Field values taking precedence over settings
        """
        values = {}
        for item in fields(cls):
            key = f"GA_{item.name.upper()}"
            if key in settings:
                values[item.name] = settings[key]
        values.update(overrides)
        return cls(**values)

    def penalty_for(self, inputs):
        """Return the penalty weight to use on ``inputs``."""
        if self.penalty_weight is not None:
            return self.penalty_weight
        largest = float(np.max(np.diag(inputs.cov))) if inputs.n else 0.0
        return self.penalty_factor * (largest or 1.0)


@dataclass(frozen=True, eq=False)
class Solution:
    """A selection vector together with its evaluation."""

    selection: SelectionVector
    objective: float
    quality: float
    budget: float
    feasible: bool
    generations_run: int
    solver: SolverKind
    evaluations: int = 0
    history: tuple = field(default=())

    @property
    def alpha(self):
        """Shortcut to the selection probabilities."""
        return self.selection.alpha


def _alpha(selection):
    return np.asarray(getattr(selection, "alpha", selection), dtype=float)


def _check_dimension(inputs, alpha):
    if alpha.shape[-1] != inputs.n:
        raise DimensionMismatchError(
            f"selection has {alpha.shape[-1]} entries, instance has "
            f"{inputs.n} cameras"
        )


def objective_value(inputs, selection):
    """Return ``sum_i sum_j alpha_i alpha_j cov_ij``.

    :param inputs: PortfolioInputs
    :param selection: SelectionVector or array of shape (N,)
    """
    alpha = _alpha(selection)
    _check_dimension(inputs, alpha)
    return float(alpha @ inputs.cov @ alpha)


def quality_value(inputs, selection):
    """Return the expected delivered resolution ``sum_i alpha_i E[R_i]``."""
    alpha = _alpha(selection)
    _check_dimension(inputs, alpha)
    return float(alpha @ inputs.expected_res)


def _objectives(inputs, population):
    return np.einsum("pi,ij,pj->p", population, inputs.cov, population)


def _violations(inputs, population):
    quality = population @ inputs.expected_res
    budget = population.sum(axis=1)
    return (np.maximum(0.0, inputs.theta - quality)
            + np.maximum(0.0, budget - inputs.psi)
            + np.maximum(0.0, -population).sum(axis=1)
            + np.maximum(0.0, population - 1.0).sum(axis=1))


def constraint_violation(inputs, selection):
    """Return the total amount by which the constraints are broken.

    Zero exactly when the quality, budget and box constraints hold.

    :param inputs: PortfolioInputs
    :param selection: SelectionVector or array of shape (N,)
    """
    alpha = _alpha(selection)
    _check_dimension(inputs, alpha)
    return float(_violations(inputs, alpha[None, :])[0])


def quality_tolerance(theta):
    """Absolute slack allowed on the quality constraint."""
    return 1e-6 * theta if theta > 0 else 1e-9


def _feasible(inputs, population):
    quality = population @ inputs.expected_res
    budget = population.sum(axis=1)
    return ((quality >= inputs.theta - quality_tolerance(inputs.theta))
            & (budget <= inputs.psi + BUDGET_TOLERANCE)
            & np.all((population >= 0.0) & (population <= 1.0), axis=1))


def verify_solution(inputs, selection):
    """Recheck the constraints without the penalty machinery.

    :param inputs: PortfolioInputs
    :param selection: SelectionVector or sequence of floats
    :returns: Names of violated constraints, empty when feasible
    """
    alpha = [float(value) for value in _alpha(selection)]
    if len(alpha) != inputs.n:
        return ["dimension"]

    violated = []
    quality = math.fsum(a * float(r)
                        for a, r in zip(alpha, inputs.expected_res))
    if quality < inputs.theta - quality_tolerance(inputs.theta):
        violated.append("quality")
    if math.fsum(alpha) > inputs.psi + BUDGET_TOLERANCE:
        violated.append("budget")
    if any(a < 0.0 or a > 1.0 for a in alpha):
        violated.append("bounds")
    return violated


def make_solution(inputs, alpha, solver, generations_run=0, evaluations=0,
                  history=()):
    """Evaluate ``alpha`` on ``inputs`` and wrap it in a Solution."""
    selection = SelectionVector(alpha)
    _check_dimension(inputs, selection.alpha)
    return Solution(
        selection=selection,
        objective=objective_value(inputs, selection),
        quality=quality_value(inputs, selection),
        budget=float(selection.alpha.sum()),
        feasible=bool(_feasible(inputs, selection.alpha[None, :])[0]),
        generations_run=generations_run,
        solver=solver,
        evaluations=evaluations,
        history=tuple(history),
    )


def _top_k(scores, count):
    """Indices of the ``count`` largest scores, ties to the lower index."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")[:count]


def selection_size(psi, n):
    """Number of cameras a fixed-cardinality strategy picks."""
    return min(int(math.floor(psi)), n)


def _top_expected_alpha(inputs):
    alpha = np.zeros(inputs.n)
    alpha[_top_k(inputs.expected_res, selection_size(inputs.psi,
                                                     inputs.n))] = 1.0
    return alpha


def _initial_population(inputs, size, rng):
    population = rng.random((size, inputs.n))
    seeds = [np.zeros(inputs.n),
             np.full(inputs.n, min(1.0, inputs.psi / max(inputs.n, 1))),
             _top_expected_alpha(inputs)]
    for row, seed in enumerate(seeds[:size]):
        population[row] = seed
    return population


def _tournament(scores, count, rng):
    first = rng.integers(scores.shape[0], size=count)
    second = rng.integers(scores.shape[0], size=count)
    return np.where(scores[first] <= scores[second], first, second)


def _crossover(population, parents, crossover_rate, rng):
    pairs = parents.shape[0] // 2
    mothers = population[parents[:pairs]]
    fathers = population[parents[pairs:2 * pairs]]
    swap = rng.random(mothers.shape) < 0.5
    swap &= (rng.random(pairs) < crossover_rate)[:, None]
    children = np.concatenate([np.where(swap, fathers, mothers),
                               np.where(swap, mothers, fathers)])
    return np.clip(children, 0.0, 1.0)


def _mutate(children, rate, scale, rng):
    mask = rng.random(children.shape) < rate
    noise = rng.normal(0.0, scale, children.shape)
    return np.clip(children + mask * noise, 0.0, 1.0)


def ga_solve(inputs, cfg=None):
    """Solve the selection problem with a real-coded genetic algorithm.

    Fitness is ``objective + penalty_weight * constraint_violation``.
    Each generation keeps ``elite_count`` elites and fills the rest of the
    population with children bred by binary tournament, uniform crossover
    and clamped Gaussian mutation. The best individual over all
    generations is returned; an infeasible instance still yields a
    best-effort Solution with ``feasible`` unset.

    :param inputs: PortfolioInputs
    :param cfg: GaConfig, defaults when omitted
    :returns: Solution
    """
    cfg = cfg or GaConfig()
    rng = np.random.default_rng(cfg.rng_seed)
    weight = cfg.penalty_for(inputs)

    if inputs.theta > float(inputs.expected_res.sum()):
        LOGGER.warning("Quality threshold %g is unreachable (total expected "
                       "resolution %g)", inputs.theta,
                       inputs.expected_res.sum())

    def fitness(population):
        return (_objectives(inputs, population)
                + weight * _violations(inputs, population))

    population = _initial_population(inputs, cfg.population_size, rng)
    scores = fitness(population)
    leader = int(np.argmin(scores))
    best, best_score = population[leader].copy(), float(scores[leader])
    history = [best_score]

    child_count = cfg.population_size - cfg.elite_count
    parent_count = 2 * ((child_count + 1) // 2)

    for generation in range(1, cfg.max_generations + 1):
        order = np.argsort(scores, kind="stable")
        elites = population[order[:cfg.elite_count]]

        parents = _tournament(scores, parent_count, rng)
        children = _crossover(population, parents, cfg.crossover_rate, rng)
        scale = cfg.mutation_scale * cfg.mutation_decay ** (
            generation / cfg.max_generations)
        children = _mutate(children[:child_count], cfg.mutation_rate, scale,
                           rng)

        population = np.concatenate([elites, children])
        scores = fitness(population)

        leader = int(np.argmin(scores))
        if scores[leader] < best_score:
            best, best_score = population[leader].copy(), float(scores[leader])
        history.append(best_score)
        assert history[-1] <= history[-2], "best fitness increased"

    solution = make_solution(
        inputs, best, SolverKind.GA,
        generations_run=cfg.max_generations,
        evaluations=cfg.population_size * (cfg.max_generations + 1),
        history=history,
    )
    LOGGER.debug("GA finished after %d generations: objective=%g "
                 "feasible=%s", solution.generations_run, solution.objective,
                 solution.feasible)
    if not solution.feasible:
        LOGGER.warning("GA returned an infeasible selection (quality %g < "
                       "theta %g or budget %g > psi %g)", solution.quality,
                       inputs.theta, solution.budget, inputs.psi)
    return solution


def grid_oracle_solve(inputs, steps_per_axis=default_config.GRID_STEPS,
                      max_cameras=default_config.MAX_ORACLE_CAMERAS):
    """Exhaustively search the grid ``{0, 1/(s-1), ..., 1}^N``.

    Returns the feasible grid point with the smallest objective. When no
    grid point is feasible the point with the smallest constraint
    violation wins. Remaining ties go to the lexicographically smallest
    selection.

    :param inputs: PortfolioInputs
    :param steps_per_axis: Grid points per camera (>= 2)
    :param max_cameras: Largest N accepted
    :returns: Solution
    """
    if inputs.n > max_cameras:
        raise OracleTooLargeError(
            f"{inputs.n} cameras exceed the grid oracle limit of "
            f"{max_cameras}"
        )
    if steps_per_axis < 2:
        raise ValueError(f"steps_per_axis must be >= 2, got {steps_per_axis}")

    levels = np.linspace(0.0, 1.0, steps_per_axis)
    points = itertools.product(levels, repeat=inputs.n)
    best_feasible = None
    best_fallback = None
    offset = 0

    while True:
        chunk = np.array(list(itertools.islice(points, ORACLE_CHUNK)))
        if chunk.size == 0:
            break
        chunk = chunk.reshape(-1, inputs.n)
        objectives = _objectives(inputs, chunk)
        feasible = _feasible(inputs, chunk)

        if feasible.any():
            candidates = np.flatnonzero(feasible)
            pick = candidates[np.argmin(objectives[candidates])]
            key = (objectives[pick], offset + pick)
            if best_feasible is None or key < best_feasible[0]:
                best_feasible = (key, chunk[pick].copy())
        elif best_feasible is None:
            violations = _violations(inputs, chunk)
            pick = np.lexsort((objectives, violations))[0]
            key = (violations[pick], objectives[pick], offset + pick)
            if best_fallback is None or key < best_fallback[0]:
                best_fallback = (key, chunk[pick].copy())
        offset += chunk.shape[0]

    winner = best_feasible or best_fallback
    solution = make_solution(inputs, winner[1], SolverKind.GRID_ORACLE,
                             evaluations=offset)
    if not solution.feasible:
        LOGGER.warning("No feasible grid point for theta=%g psi=%g",
                       inputs.theta, inputs.psi)
    return solution


def baseline_top_expected(inputs):
    """Select the ``floor(psi)`` cameras with the largest expected
    resolution, ties to the lower index.

    :param inputs: PortfolioInputs
    :returns: Solution
    """
    return make_solution(inputs, _top_expected_alpha(inputs),
                         SolverKind.BASELINE_TOP_EXPECTED)


def uniform_random_baseline(inputs, seed):
    """Select ``floor(psi)`` distinct cameras uniformly at random.

    :param inputs: PortfolioInputs
    :param seed: Seed for numpy.random.default_rng
    :returns: Solution
    """
    rng = np.random.default_rng(seed)
    alpha = np.zeros(inputs.n)
    chosen = rng.choice(inputs.n, size=selection_size(inputs.psi, inputs.n),
                        replace=False)
    alpha[chosen] = 1.0
    return make_solution(inputs, alpha, SolverKind.UNIFORM_RANDOM)
