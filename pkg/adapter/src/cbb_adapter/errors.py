"""Adapter error hierarchy.

Everything raised on purpose derives from AdapterError so callers can
catch one type at the boundary; subclasses say which stage failed.
"""


class AdapterError(Exception):
    """Base class for all adapter failures."""


class ManifestError(AdapterError):
    """A battery or training manifest is missing, malformed, or of the
    wrong kind for the requested operation."""


class ModelLoadError(AdapterError):
    """The model identifier is unknown or the checkpoint cannot be loaded
    into it."""


class TrainingDiverged(AdapterError):
    """The fine-tune loss became non-finite; carries the epoch index."""
