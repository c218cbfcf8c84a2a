class ParameterDomainError(ValueError):
    """A model parameter lies outside its admissible domain."""


class InputError(ValueError):
    """Malformed or out-of-range input (checkpoints, files, partitions...)."""


class EnumerationTooLarge(InputError):
    """Exhaustive enumeration was requested for a problem that is too big."""


class NumericalError(ArithmeticError):
    """A numerical routine produced a non-finite or non-SPD intermediate."""
