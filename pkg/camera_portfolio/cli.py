"""Command line interface."""
import dataclasses
import logging
import os

import click
import numpy as np

from camera_portfolio.config import create_config, thread_count
from camera_portfolio.errors import (InfeasibleSolutionError,
                                     OutputPathError, PartialSweepError,
                                     PortfolioCamError,
                                     ScenarioValidationError)
from camera_portfolio.model import build_portfolio_inputs, min_eigenvalue
from camera_portfolio.optimizer import (ga_solve, grid_oracle_solve,
                                        verify_solution)
from camera_portfolio.report import (format_solution, format_summary,
                                     plot_path, write_alpha_csv,
                                     write_plot_csv, write_results_csv,
                                     write_sweep_csv)
from camera_portfolio.scenario import (generate_scenario, load_scenario,
                                       write_scenario)
from camera_portfolio.sim import (SWEEP_PARAMETERS, SelectionMode, Strategy,
                                  compare_strategies, vary)

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_PARTIAL_SWEEP = 3


class PortfolioGroup(click.Group):
    """Command group that turns exceptions into exit statuses.

    Handlers are registered per exception class with :meth:`errorhandler`
    and looked up along the exception's MRO. Each handler returns the exit
    status.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.error_handlers = {}

    def errorhandler(self, exception_class):
        """Register the decorated function as handler of
        ``exception_class``."""
        def decorator(function):
            self.error_handlers[exception_class] = function
            return function
        return decorator

    def handle_exception(self, error):
        """Run the most specific handler and return the exit status."""
        for klass in type(error).__mro__:
            if klass in self.error_handlers:
                return self.error_handlers[klass](error)
        raise error

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent,
                                        **extra)
        except click.UsageError as error:
            error.exit_code = EXIT_CONFIG
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as error:
            error.exit_code = EXIT_CONFIG
            raise
        except (click.exceptions.Exit, click.exceptions.Abort,
                click.ClickException):
            raise
        except Exception as error:  # pylint: disable=broad-except
            ctx.exit(self.handle_exception(error))


@click.group(cls=PortfolioGroup)
@click.option("--quiet", is_flag=True, help="Only log warnings and errors.")
@click.pass_context
def cli(ctx, quiet):
    """Portfolio-theoretic camera selection experiments."""
    level = logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level,
                        format="%(asctime)s %(levelname)s %(name)s: "
                               "%(message)s")
    logging.getLogger("camera_portfolio").setLevel(level)
    ctx.obj = create_config()


@cli.errorhandler(ScenarioValidationError)
def invalid_scenario(error):
    """Print one line per problem."""
    for problem in error.problems:
        click.echo(f"{error.prefix}: {problem}", err=True)
    return EXIT_CONFIG


@cli.errorhandler(PortfolioCamError)
def configuration_error(error):
    """Print the error; configuration and input errors."""
    click.echo(str(error), err=True)
    return EXIT_CONFIG


@cli.errorhandler(ValueError)
def bad_value(error):
    """Print the error; invalid values given on the command line."""
    click.echo(f"invalid value: {error}", err=True)
    return EXIT_CONFIG


@cli.errorhandler(InfeasibleSolutionError)
def infeasible(error):
    """Print the error; the best-effort selection is already printed."""
    click.echo(str(error), err=True)
    return EXIT_INFEASIBLE


@cli.errorhandler(PartialSweepError)
def partial_sweep(error):
    """Print the error; completed sweep values are already written."""
    click.echo(str(error), err=True)
    return EXIT_PARTIAL_SWEEP


@cli.errorhandler(Exception)
def internal_error(error):
    """Log unexpected errors with traceback."""
    LOGGER.error(error, exc_info=True)
    click.echo(f"internal error: {error}", err=True)
    return EXIT_CONFIG


def _parse_values(ctx, param, value):
    # pylint: disable=unused-argument
    try:
        values = [float(item) for item in value.split(",") if item.strip()]
    except ValueError as error:
        raise click.BadParameter(f"{value!r} is not a comma separated list "
                                 f"of numbers") from error
    if not values:
        raise click.BadParameter("at least one value is required")
    return values


def _apply_overrides(cfg, seed, mode):
    if seed is not None:
        cfg = cfg.replace(master_seed=seed)
    if mode is not None:
        cfg = cfg.replace(selection_mode=SelectionMode(mode))
    return cfg


def default_results_path(scenario):
    """Results CSV written by ``compare`` when no path is configured."""
    stem = os.path.splitext(os.path.basename(scenario))[0]
    return f"{stem}.results.csv"


scenario_argument = click.argument(
    "scenario", type=click.Path(dir_okay=False)
)
seed_option = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1),
                           help="Override the scenario's master seed.")
mode_option = click.option("--mode", type=click.Choice(["prob", "top"]),
                           help="Override the scenario's selection mode.")


@cli.command()
@scenario_argument
@click.pass_obj
def validate(settings, scenario):
    """Check a scenario file and print a summary."""
    cfg = load_scenario(scenario, settings)
    rho = cfg.disruption.spatial_rho.rho
    click.echo(f"scenario: {cfg.name}")
    click.echo(f"cameras: {len(cfg.cameras)}")
    if cfg.theta_fraction is None:
        click.echo(f"theta: {cfg.theta:g}")
    else:
        click.echo("theta: " + ", ".join(
            f"{cfg.theta_for(psi):g}" for psi in cfg.psi_values))
    click.echo("psi: " + ", ".join(f"{psi:g}" for psi in cfg.psi_values))
    click.echo(f"quality threshold: {cfg.quality_threshold:g}")
    click.echo(f"correlation: positive semidefinite (smallest eigenvalue "
               f"{min_eigenvalue(rho):.6g})")
    click.echo("ok")


@cli.command()
@scenario_argument
@click.option("--psi", type=float,
              help="Camera budget; defaults to the scenario's first psi.")
@click.option("--oracle", is_flag=True,
              help="Also run the exhaustive grid search and print the gap.")
@click.option("--steps", type=click.IntRange(min=2),
              help="Grid points per camera for --oracle.")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1),
              help="Override the genetic algorithm seed.")
@click.option("--out", type=click.Path(dir_okay=False),
              help="Write the selection vector to this CSV file.")
@click.pass_obj
def optimize(settings, scenario, psi, oracle, steps, seed, out):
    """Solve the camera selection problem of a scenario."""
    cfg = load_scenario(scenario, settings)
    psi = cfg.psi_values[0] if psi is None else psi
    inputs = build_portfolio_inputs(cfg.cameras, cfg.disruption.spatial_rho,
                                    cfg.theta_for(psi), psi)
    ga = cfg.ga if seed is None else dataclasses.replace(cfg.ga, rng_seed=seed)

    solution = ga_solve(inputs, ga)
    click.echo(format_solution(solution))

    if oracle:
        reference = grid_oracle_solve(
            inputs, steps or settings["GRID_STEPS"],
            settings["MAX_ORACLE_CAMERAS"])
        click.echo(format_solution(reference))
        click.echo(f"gap: {solution.objective - reference.objective:.6g}")

    if out:
        write_alpha_csv(out, solution)

    violated = verify_solution(inputs, solution.selection)
    if not solution.feasible or violated:
        raise InfeasibleSolutionError(
            f"no selection meets theta={inputs.theta:g} with psi={psi:g} "
            f"(violated: {', '.join(violated) or 'tolerance'})"
        )


@cli.command()
@scenario_argument
@click.option("--out", type=click.Path(dir_okay=False),
              help="Results CSV; defaults to the scenario's [output] csv, "
                   "then to SCENARIO_NAME.results.csv in the working "
                   "directory.")
@seed_option
@mode_option
@click.pass_obj
def compare(settings, scenario, out, seed, mode):
    """Compare selection strategies over the scenario's psi values."""
    cfg = _apply_overrides(load_scenario(scenario, settings), seed, mode)
    table = compare_strategies(cfg, threads=thread_count(settings))
    click.echo(format_summary(table, cfg.quality_threshold))

    out = out or cfg.output_csv or default_results_path(scenario)
    write_results_csv(out, table, cfg.master_seed)
    write_plot_csv(plot_path(out), table)
    click.echo(f"wrote {out}")


@cli.command()
@scenario_argument
@click.argument("param", type=click.Choice(SWEEP_PARAMETERS))
@click.argument("values", callback=_parse_values)
@click.option("--out", type=click.Path(dir_okay=False),
              help="Results CSV with a leading sweep_value column.")
@seed_option
@mode_option
@click.pass_obj
def sweep(settings, scenario, param, values, out, seed, mode):
    """Repeat the comparison for each of the comma separated VALUES of
    PARAM."""
    cfg = _apply_overrides(load_scenario(scenario, settings), seed, mode)
    threads = thread_count(settings)
    blocks = []
    failed = []
    for value in values:
        try:
            table = compare_strategies(vary(cfg, param, value), threads)
        except ValueError as error:
            LOGGER.error("Skipping %s=%g: %s", param, value, error)
            failed.append(value)
            continue
        portfolio = [stats.objective for stats in table
                     if stats.strategy is Strategy.PORTFOLIO]
        if portfolio:
            LOGGER.info("%s=%g: mean portfolio objective %.6g", param, value,
                        float(np.mean(portfolio)))
        click.echo(f"{param} = {value:g}")
        click.echo(format_summary(table))
        blocks.append((value, table))

    out = out or cfg.output_csv
    if out:
        write_sweep_csv(out, blocks, cfg.master_seed)

    if failed:
        raise PartialSweepError(
            f"{len(failed)} of {len(values)} values failed: "
            + ", ".join(f"{value:g}" for value in failed)
        )


@cli.command()
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--cameras", type=click.IntRange(min=1), default=7,
              show_default=True)
@click.option("--blocks", type=click.IntRange(min=1), default=2,
              show_default=True)
@click.option("--intra", type=float, default=0.8, show_default=True,
              help="Correlation within a block.")
@click.option("--inter", type=float, default=0.1, show_default=True,
              help="Correlation between blocks.")
@click.option("--res-min", type=float, default=100.0, show_default=True)
@click.option("--res-max", type=float, default=300.0, show_default=True)
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0,
              show_default=True)
@click.pass_obj
def generate(settings, out, cameras, blocks, intra, inter, res_min, res_max,
             seed):
    """Write a random block-correlated scenario file to OUT."""
    cfg = generate_scenario(cameras=cameras, blocks=blocks, intra=intra,
                            inter=inter, res_min=res_min, res_max=res_max,
                            seed=seed, settings=settings)
    try:
        write_scenario(cfg, out)
    except OSError as error:
        raise OutputPathError(f"{out}: {error}") from error
    click.echo(f"wrote {out}")


def main():
    """Entry point of the ``portfolio-cam`` console script."""
    cli(prog_name="portfolio-cam")  # pylint: disable=no-value-for-parameter


if __name__ == "__main__":
    main()
