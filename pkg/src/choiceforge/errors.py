"""Exception hierarchy shared by every choiceforge module.

Each class carries the CLI exit code it maps to so the command layer can
translate failures without a lookup table of its own.
"""


class ChoiceForgeError(Exception):
    exit_code = 1


class InputError(ChoiceForgeError, ValueError):
    """Malformed or out-of-range input (empty data, bad counts, bad files)."""

    exit_code = 2


class SchemaError(InputError):
    """Attribute vectors, parameters or scenarios disagree on their schema."""


class CollinearityError(InputError):
    """Regression inputs are rank deficient."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class NonConvergenceError(ChoiceForgeError):
    exit_code = 3


class IdentificationError(ChoiceForgeError):
    """The data carry no information about one or more parameters."""

    exit_code = 4

    def __init__(self, message, attribute=None):
        super().__init__(message)
        self.attribute = attribute


class SeparationError(IdentificationError):
    """The likelihood keeps improving as coefficients diverge."""


class SingularHessianError(IdentificationError):
    pass


class EconomicValidityError(ChoiceForgeError):
    """Price coefficient is not negative, so demand slopes upward."""

    exit_code = 5


class UnboundedRevenueError(EconomicValidityError):
    pass
