"""Exception hierarchy.

Everything raised deliberately by the toolkit derives from :class:`DarkbenchError`
so the CLI can map domain failures to exit status 1.
"""


class DarkbenchError(Exception):
    """Base class for domain errors."""


class FormatMismatchError(DarkbenchError, ValueError):
    """Geometry, bit depth or frame count disagree between inputs."""


class ZeroFrameError(DarkbenchError, ValueError):
    """A video file holds no frames."""


class CorruptSampleError(DarkbenchError, ValueError):
    """A stored sample exceeds the range allowed by the bit depth."""


class FrameRangeError(DarkbenchError, IndexError):
    """Frame index outside ``[0, frame_count)``."""


class DimensionError(DarkbenchError, ValueError):
    """Planes have mismatched or insufficient dimensions."""


class DegenerateSamplesError(DarkbenchError, ValueError):
    """Samples cannot support a distribution fit (constant, one-signed, too few)."""


class ConfigurationError(DarkbenchError, ValueError):
    """Invalid or missing configuration."""


class CurveError(DarkbenchError, ValueError):
    """A rate-quality curve is unusable for Bjontegaard computation."""


class EncodeError(DarkbenchError):
    """An external command exited with nonzero status."""

    def __init__(self, message, returncode=None, log=""):
        super().__init__(message)
        self.returncode = returncode
        self.log = log


class AdapterError(DarkbenchError):
    """A codec adapter or filter produced unusable output."""


class UnreachableTargetError(DarkbenchError):
    """A target bitrate lies outside the rates reachable over the QP range."""


class ImportScoresError(DarkbenchError, ValueError):
    """An external score file does not fit the declared benchmark."""
