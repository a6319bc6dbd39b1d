"""Exception hierarchy shared across the toolkit."""


class OcctoolError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------- image codec

class SizeError(OcctoolError):
    """Input length is not a positive multiple of the block size."""


class SignatureError(OcctoolError):
    """Block signature or version does not match the format."""


class LayoutError(OcctoolError):
    """Region offsets are out of order, overlap, or exceed the block."""


class CountError(OcctoolError):
    """Declared sensor count does not fit the block's regions."""


class InvariantError(OcctoolError):
    """Image violates a type invariant and cannot be encoded."""


class NoValidBuffer(OcctoolError):
    """Neither reading buffer is valid (torn or uninitialized snapshot)."""


class SensorNotFound(OcctoolError):
    """No sensor with the requested name exists in the image."""


class OutOfBounds(OcctoolError):
    """A locator or read range points beyond the end of the data."""


# ---------------------------------------------------------------- reader

class SourceUnavailable(OcctoolError):
    """The image source cannot be opened or has been exhausted."""


class TooFewSamples(OcctoolError):
    """Not enough trace entries for the requested statistic."""


class NoChanges(OcctoolError):
    """Trace values never change; the update-rate heuristic cannot apply."""


# ---------------------------------------------------------------- analysis

class ZeroSampleDelta(OcctoolError):
    """update_tag did not advance between the two records."""


class MismatchedSensor(OcctoolError):
    """Records belong to different sensors (gsid mismatch)."""


class LengthMismatch(OcctoolError):
    """Paired arrays have different or zero lengths."""


class ZeroTruthValue(OcctoolError):
    """MAPE is undefined for zero-valued truth entries."""


class DegenerateInput(OcctoolError):
    """Fit input has insufficient rank (too few distinct abscissae)."""


class AlignmentError(OcctoolError):
    """Series share no common update instants within tolerance."""


class NoPattern(OcctoolError):
    """Fewer than one complete alternation cycle in the series."""


class InconsistentRate(OcctoolError):
    """Beat-frequency pairs do not agree on a single sampling rate."""


# ---------------------------------------------------------------- simulator

class TimeReversal(OcctoolError):
    """Simulator asked to advance to a time in the past."""
