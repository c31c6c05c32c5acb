"""Exception hierarchy shared by all microplan modules."""


class MicroplanError(Exception):
    """Base class for every error raised by this package."""


# input ingestion
class InputError(MicroplanError):
    pass


class ParseError(InputError):
    pass


class SchemaError(InputError):
    pass


class UnitError(InputError):
    pass


class ZeroImpedance(InputError):
    pass


# solver layer
class NumericalFailure(MicroplanError):
    """The LP layer could not certify a result to the residual targets."""


# formulation / extraction
class StageError(MicroplanError):
    pass


class ModelSizeError(MicroplanError):
    pass


class MismatchError(MicroplanError):
    """Cost recomputation disagrees with the solver objective."""


class IntegralityError(MicroplanError):
    pass


class InfeasibleError(MicroplanError):
    def __init__(self, message, precheck=None):
        super().__init__(message)
        self.precheck = precheck


class SolverLimitError(MicroplanError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


# oracle
class Diverged(MicroplanError):
    def __init__(self, message, mismatch=None, period=None):
        super().__init__(message)
        self.mismatch = mismatch
        self.period = period


class IslandedBus(MicroplanError):
    pass


class TooManyBinaries(MicroplanError):
    pass
