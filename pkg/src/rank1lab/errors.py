"""Exception types shared across the package."""


class Rank1Error(Exception):
    """Base class; ``code`` is the machine-readable tag used in CLI error JSON."""

    code = "error"


class InvalidParameters(Rank1Error, ValueError):
    code = "invalid_parameters"


class StageOutOfRange(Rank1Error, IndexError):
    code = "stage_out_of_range"


class IndexOutOfRange(Rank1Error, IndexError):
    code = "index_out_of_range"


class StageMismatch(Rank1Error, ValueError):
    code = "stage_mismatch"


class UnresolvableAtCap(Rank1Error, RuntimeError):
    code = "unresolvable_at_cap"


class WindowViolation(Rank1Error, ValueError):
    code = "window_violation"


class KOutOfRange(Rank1Error, ValueError):
    code = "k_out_of_range"


class EmptyPSet(Rank1Error, ValueError):
    code = "empty_pset"


class TooLarge(Rank1Error, MemoryError):
    """The exact run-length result would exceed the configured run budget."""

    code = "too_large"
