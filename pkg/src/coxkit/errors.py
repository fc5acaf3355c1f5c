"""Exception types shared across the package."""


class CoxkitError(Exception):
    """Base class for all coxkit errors."""


class InputError(CoxkitError, ValueError):
    """Invalid user input: bad arguments, malformed files, inconsistent config."""


class UnsupportedConfigError(InputError):
    """Configuration requests a feature outside the supported model family."""


class NumericalError(CoxkitError, RuntimeError):
    """A numerical procedure failed beyond its built-in safeguards."""


class RejectionCapError(NumericalError):
    """A rejection loop exceeded its iteration cap.

    Carries the index of the stuck draw so the degenerate regime (acceptance
    probability ~ 0) can be diagnosed from logs.
    """

    def __init__(self, index, cap):
        self.index = index
        self.cap = cap
        super().__init__(
            f"rejection sampling exceeded {cap} tries at candidate index {index}"
        )
