"""Exception hierarchy.

Each class carries the process exit code the CLI maps it to.
"""


class SgoscError(Exception):
    exit_code = 1


class InvalidInputError(SgoscError, ValueError):
    """Non-finite or out-of-domain argument."""

    exit_code = 2


class ConfigError(SgoscError, ValueError):
    """Scenario or gain configuration failed validation."""

    exit_code = 2


class IntegrationBlowup(SgoscError, ArithmeticError):
    """Integration produced a non-finite or runaway state."""

    exit_code = 3

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t:.6g})")
        self.t = t


class OracleIntegrityError(SgoscError):
    """Density-matrix integration lost trace, hermiticity or positivity."""

    exit_code = 4


class TruncationError(OracleIntegrityError):
    exit_code = 4


class UnphysicalBathError(InvalidInputError):
    """Negative bath occupation handed to the master equation."""


class InfeasibleStateError(InvalidInputError):
    """Requested moments cannot be realized by a density matrix."""
