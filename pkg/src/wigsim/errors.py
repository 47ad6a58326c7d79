"""Exception types shared across the package.

Each error carries the CLI exit code it maps to, so the command-line layer can
translate failures without a lookup table.
"""


class WigsimError(Exception):
    exit_code = 1


class ConfigError(WigsimError, ValueError):
    """Invalid user input: schema violations, out-of-range parameters.

    ``path`` names the offending field (e.g. ``gates[1].targets[0]``) when known.
    """

    exit_code = 2

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DimensionError(ConfigError):
    pass


class DomainError(WigsimError, ValueError):
    """A closed form evaluated where it is singular or undefined."""

    exit_code = 2


class ResourceError(WigsimError):
    """A grid or quadrature would exceed a memory or work cap."""

    exit_code = 3


class OracleUnavailableError(WigsimError):
    exit_code = 4


class DegenerateGridError(WigsimError):
    """A discretized distribution carries no mass inside its truncation region."""

    exit_code = 2


class AccuracyError(WigsimError):
    """Quadrature refinement failed to converge before hitting its cap."""

    exit_code = 3


class RegionTooSmallError(WigsimError, ValueError):
    """A quadrature region misses more probability mass than allowed."""

    exit_code = 2
