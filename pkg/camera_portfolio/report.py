"""Result files and printed summaries."""
import csv
import logging
import os

from camera_portfolio.errors import OutputPathError

LOGGER = logging.getLogger(__name__)

RESULTS_HEADER = ("strategy", "psi", "mean_quality", "std_quality",
                  "reliability", "rel_ci_lo", "rel_ci_hi", "epochs", "seed")
SWEEP_COLUMN = "sweep_value"


def fmt(value):
    """Format a float with 6 significant digits."""
    return format(float(value), ".6g")


def results_row(stats, seed):
    """Return the ResultsCsv row of one RunStats."""
    low, high = stats.ci95_reliability
    return [stats.strategy.value, fmt(stats.psi), fmt(stats.mean_quality),
            fmt(stats.std_quality), fmt(stats.reliability), fmt(low),
            fmt(high), str(stats.epochs_total), str(seed)]


def _ordered(table):
    return sorted(table, key=lambda stats: (stats.psi, stats.strategy.value))


def _write_rows(path, header, rows):
    directory = os.path.dirname(os.path.abspath(path))
    try:
        if not os.path.isdir(directory):
            raise OSError(f"directory {directory} does not exist")
        with open(path, "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exception:
        raise OutputPathError(f"{path}: {exception}") from exception
    LOGGER.info("Wrote %d rows to %s", len(rows), path)


def write_results_csv(path, table, seed):
    """Write a ResultsCsv file.

    :param path: Output path
    :param table: Iterable of RunStats
    :param seed: Master seed the table was produced with
    """
    rows = [results_row(stats, seed) for stats in _ordered(table)]
    _write_rows(path, RESULTS_HEADER, rows)


def write_sweep_csv(path, blocks, seed):
    """Write a ResultsCsv with a leading ``sweep_value`` column.

    :param blocks: Sequence of ``(sweep_value, table)`` pairs
    """
    rows = [[fmt(value)] + results_row(stats, seed)
            for value, table in blocks for stats in _ordered(table)]
    _write_rows(path, (SWEEP_COLUMN,) + RESULTS_HEADER, rows)


def plot_path(path):
    """Path of the plot companion of a results file."""
    return f"{path}.plot.csv"


def write_plot_csv(path, table):
    """Write reliability per psi with one column per strategy."""
    strategies = sorted({stats.strategy.value for stats in table})
    by_psi = {}
    for stats in table:
        by_psi.setdefault(stats.psi, {})[stats.strategy.value] = stats
    rows = []
    for psi in sorted(by_psi):
        row = [fmt(psi)]
        for name in strategies:
            stats = by_psi[psi].get(name)
            row.append(fmt(stats.reliability) if stats else "")
        rows.append(row)
    _write_rows(path, ["psi"] + strategies, rows)


def read_results_csv(path):
    """Read a ResultsCsv (or sweep) file back.

    :returns: List of dicts; numeric columns converted to float or int
    """
    with open(path, encoding="utf-8", newline="") as results:
        rows = list(csv.DictReader(results))
    for row in rows:
        for key in row:
            if key in ("epochs", "seed"):
                row[key] = int(row[key])
            elif key != "strategy":
                row[key] = float(row[key])
    return rows


def format_summary(table, threshold=None):
    """Fixed-width summary table of a strategy comparison.

    :param table: Iterable of RunStats
    :param threshold: Quality threshold the reliabilities refer to
    :returns: Multi-line string
    """
    lines = []
    if threshold is not None:
        lines.append(f"quality threshold: {fmt(threshold)}")
    lines.append(f"{'strategy':<24}{'psi':>8}{'mean_quality':>14}"
                 f"{'std_quality':>14}{'reliability':>13}{'95% CI':>22}")
    for stats in _ordered(table):
        low, high = stats.ci95_reliability
        interval = f"[{fmt(low)}, {fmt(high)}]"
        lines.append(f"{stats.strategy.value:<24}{fmt(stats.psi):>8}"
                     f"{fmt(stats.mean_quality):>14}"
                     f"{fmt(stats.std_quality):>14}"
                     f"{fmt(stats.reliability):>13}{interval:>22}")
    return "\n".join(lines)


def format_solution(solution):
    """Human-readable rendering of an optimizer Solution."""
    alpha = ", ".join(fmt(value) for value in solution.alpha)
    return "\n".join([
        f"solver: {solution.solver.value}",
        f"alpha: [{alpha}]",
        f"objective: {fmt(solution.objective)}",
        f"quality: {fmt(solution.quality)}",
        f"budget: {fmt(solution.budget)}",
        f"feasible: {'yes' if solution.feasible else 'no'}",
    ])


def write_alpha_csv(path, solution):
    """Write the selection vector as ``camera,alpha`` rows."""
    rows = [[str(index), fmt(value)]
            for index, value in enumerate(solution.alpha)]
    _write_rows(path, ["camera", "alpha"], rows)
