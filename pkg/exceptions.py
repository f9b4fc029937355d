"""
Error hierarchy. Library code raises these; only cli/ turns them into exit codes.
"""
from typing import Any, Dict, Optional


class SimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimError, ValueError):
    """Bad scenario, parameter table, mesh or reference input."""


class MeshParseError(ConfigError):
    """Mesh file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class CoverageError(ConfigError):
    """A particle falls in no shape-matching cluster."""

    def __init__(self, particle: int, position=None):
        self.particle = particle
        self.position = position
        msg = f"particle {particle} is not covered by any cluster"
        if position is not None:
            msg += f" (rest position {tuple(round(float(c), 6) for c in position)})"
        msg += "; check cluster_radius >= cluster_spacing / 2"
        super().__init__(msg)


class MeasurementError(ConfigError):
    """A metric cannot be evaluated with the given selection or data."""


class SimulationInstabilityError(SimError):
    """The solver produced non-finite state or was driven past its stability limit."""

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        particle: Optional[int] = None,
        constraint: Optional[str] = None,
        params: Optional[Dict[str, Any]] = None,
    ):
        self.step = step
        self.particle = particle
        self.constraint = constraint
        self.params = params
        self.message = message
        super().__init__(message)

    def with_params(self, params: Dict[str, Any]) -> "SimulationInstabilityError":
        """Return a copy annotated with the parameter set that produced it."""
        return SimulationInstabilityError(
            f"{self.message} [params: {params}]",
            step=self.step,
            particle=self.particle,
            constraint=self.constraint,
            params=params,
        )

    def __str__(self) -> str:
        parts = [self.message]
        if self.step is not None:
            parts.append(f"step={self.step}")
        if self.particle is not None:
            parts.append(f"particle={self.particle}")
        if self.constraint is not None:
            parts.append(f"constraint={self.constraint}")
        return " | ".join(parts)


class CalibrationError(SimError):
    """Every evaluation of a calibration run was unstable."""
