"""Exception hierarchy shared by all scheme modules."""


class BitProbeError(Exception):
    """Base class for every error raised by this package."""


class CorruptScheme(BitProbeError):
    """A scheme or memory file is malformed (bad address, bad header)."""


class FormulaRegime(BitProbeError):
    """Parameters fall outside the range where a size formula is constructible."""


class RetriesExhausted(BitProbeError):
    """A sample-and-validate constructor ran out of attempts."""


class BudgetExceeded(BitProbeError):
    """An exhaustive check would enumerate more candidates than allowed."""


class UnsupportedT(BitProbeError):
    """Probe count not supported by the requested construction."""


class StoreError(BitProbeError):
    """A storer could not produce a valid memory for the requested set."""


class Unsatisfiable(StoreError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotAdmissible(StoreError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NoMatching(StoreError):
    pass


class VerificationFailed(StoreError):
    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class TooFewControlled(BitProbeError):
    pass


class DegenerateCycle(BitProbeError):
    pass


class NotFound(BitProbeError):
    """The adversary found no fooling pair."""
