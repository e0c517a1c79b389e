"""Exception types shared across the package.

The CLI maps these onto exit codes: parameter problems exit 2, infeasible
dispersal exits 3, broken internal invariants exit 4.
"""


class PcmtError(Exception):
    exit_code = 1


class ParameterError(PcmtError, ValueError):
    exit_code = 2


class CapacityError(ParameterError):
    """Raised when an exhaustive search would exceed its size guard."""


class InfeasibleError(PcmtError):
    exit_code = 3


class StructuralError(PcmtError, RuntimeError):
    """A graph or codeword violates an invariant that construction guarantees."""

    exit_code = 4
