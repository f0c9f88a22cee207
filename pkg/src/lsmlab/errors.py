"""Exception hierarchy.

Each class maps onto one CLI exit code (see :mod:`lsmlab.cli`).
"""


class LSMLabError(Exception):
    exit_code = 1


class DomainError(LSMLabError, ValueError):
    """Invalid argument: bad site index, bad spin magnitude, dimension too small."""

    exit_code = 2


class ModelError(LSMLabError, ValueError):
    """The model or lattice cannot support the requested construction."""

    exit_code = 2


class ConfigError(LSMLabError, ValueError):
    exit_code = 2


class UsageError(LSMLabError, ValueError):
    exit_code = 2


class LSMConditionError(LSMLabError):
    """One of the structural hypotheses LSM1-LSM6 fails for the model."""

    exit_code = 3

    def __init__(self, condition, message):
        self.condition = condition
        super().__init__(f"{condition} violated: {message}")


class PreconditionError(LSMLabError, ValueError):
    exit_code = 4


class NumericError(LSMLabError, ArithmeticError):
    exit_code = 4


class BoundViolation(LSMLabError):
    exit_code = 5
