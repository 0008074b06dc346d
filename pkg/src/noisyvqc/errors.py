"""Exception types raised across the package."""


class NoisyVQCError(Exception):
    """Base class for all package errors."""


class DimensionError(NoisyVQCError, ValueError):
    """Operand shapes, qubit counts or target lists are inconsistent."""


class NotCliffordError(NoisyVQCError, ValueError):
    """A unitary does not map Pauli operators to Pauli operators."""


class NotUnitaryError(NoisyVQCError, ValueError):
    pass


class ChannelError(NoisyVQCError, ValueError):
    """Invalid channel parameters or a channel that violates a required structure."""


class NoiseModelError(NoisyVQCError, ValueError):
    """A noise schedule does not satisfy the clauses of its model tag."""


class NumericalError(NoisyVQCError, ArithmeticError):
    """A computed quantity left its admissible range beyond tolerance."""


class PreconditionError(NoisyVQCError, ValueError):
    """Inputs to a verification routine do not satisfy its assumptions."""
