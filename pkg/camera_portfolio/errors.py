"""Exceptions raised by camera_portfolio."""


class PortfolioCamError(Exception):
    """Base class for all errors raised by this package."""

    prefix = "error"

    def __str__(self):
        return f"{self.prefix}: {super().__str__()}"


class ScenarioNotFoundError(PortfolioCamError):
    """Scenario file does not exist or cannot be read."""

    prefix = "missing file"


class ScenarioParseError(PortfolioCamError):
    """Scenario file is not valid INI or has a malformed value."""

    prefix = "parse error"


class ScenarioValidationError(PortfolioCamError, ValueError):
    """Scenario file parsed but violates one or more invariants.

    :param problems: One human-readable line per violation
    """

    prefix = "invalid scenario"

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DimensionMismatchError(PortfolioCamError, ValueError):
    """Vector or matrix sizes disagree."""

    prefix = "dimension mismatch"


class NotPositiveSemidefiniteError(PortfolioCamError, ValueError):
    """Matrix has an eigenvalue below the PSD floor.

    :param min_eigenvalue: Most negative eigenvalue found
    """

    prefix = "not positive semidefinite"

    def __init__(self, min_eigenvalue):
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__(
            f"most negative eigenvalue is {self.min_eigenvalue:.6g}"
        )


class OracleTooLargeError(PortfolioCamError, ValueError):
    """Grid oracle requested for too many cameras."""

    prefix = "oracle too large"


class EmptyRecordsError(PortfolioCamError, ValueError):
    """Aggregation over zero epoch records."""

    prefix = "empty records"


class OutputPathError(PortfolioCamError):
    """Result file cannot be written."""

    prefix = "unwritable output"


class InfeasibleSolutionError(PortfolioCamError):
    """Optimizer found no selection meeting the constraints."""

    prefix = "infeasible"


class PartialSweepError(PortfolioCamError):
    """Some values of a parameter sweep could not be run."""

    prefix = "partial sweep"
