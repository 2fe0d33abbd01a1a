"""Exception taxonomy shared across the package."""


class DataFormatError(ValueError):
    """A diary file or record violates the input schema."""


class UnknownStatusChar(DataFormatError):
    pass


class NonContiguousDays(DataFormatError):
    pass


class DuplicateSubjectDay(DataFormatError):
    pass


class BadTreatmentCode(DataFormatError):
    pass


class EmptySeries(DataFormatError):
    pass


class EmptyDataset(DataFormatError):
    pass


class ModelError(ValueError):
    """Invalid model parameters or likelihood inputs."""


class NonPositiveBeta(ModelError):
    pass


class NonPositiveDuration(ModelError):
    pass


class UnassignedLatent(ModelError):
    pass


class ZeroProbabilityTransition(ModelError):
    pass


class SamplerError(RuntimeError):
    pass


class AllZeroMass(SamplerError):
    pass


class ChainDiverged(SamplerError):
    pass


class TooFewDraws(ValueError):
    pass


class EmptyDraws(ValueError):
    pass


class HorizonTooShort(ValueError):
    pass


class InvalidStart(ValueError):
    pass


class ConditioningFailure(RuntimeError):
    pass
