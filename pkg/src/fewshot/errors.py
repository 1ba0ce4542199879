"""Exception types shared across the library."""


class FewshotError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FewshotError):
    """Invalid configuration values or incompatible options."""


class CsvFormatError(FewshotError):
    """Malformed dataset CSV; message carries the offending line number."""


class ShapeError(FewshotError):
    """Array dimensions do not match the expected contract."""


class SamplingError(FewshotError):
    """An episode cannot be drawn from the given data pools."""


class MiningError(FewshotError):
    """A query has no usable positives or negatives in the support set."""


class ConsistencyError(FewshotError):
    """Inputs that must correspond to each other do not."""


class TrainingError(FewshotError):
    """Optimization failure, typically a non-finite loss or gradient."""
