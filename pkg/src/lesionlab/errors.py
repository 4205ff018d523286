"""Exception hierarchy shared by the pipeline stages."""


class LesionLabError(Exception):
    """Base class for all errors raised by lesionlab."""


class ParameterError(LesionLabError, ValueError):
    """An operation received an out-of-range parameter."""


class EmptyRegionError(LesionLabError, ValueError):
    """A region contains no pixels to summarize."""


class NoPairsError(LesionLabError, ValueError):
    """A mask admits no co-occurring pixel pair for the requested offset."""


class ConfigError(LesionLabError):
    """Invalid or unknown configuration."""


class DataError(LesionLabError):
    """Dataset layout or file content problem."""


class PipelineError(LesionLabError):
    """A pipeline stage failed; message carries stage and file context."""
