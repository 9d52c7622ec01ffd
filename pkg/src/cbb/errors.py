"""Exception types shared across the package."""

from __future__ import annotations


class CbbError(Exception):
    """Base class for all package-specific failures."""


class GenerationFailed(CbbError):
    """Polygon generation exhausted its retry budget for a seed."""


class NoSuitableSite(CbbError):
    """The polygon has no location matching the requested edit condition."""


class MalformedMask(CbbError):
    """A mask file violates the binary/probability mask contract."""


class MissingExternalMask(CbbError):
    """An expected mask file is absent from an external mask directory."""


class DimensionMismatch(CbbError):
    """An external mask's pixel dimensions do not match the battery resolution."""


class VersionError(CbbError):
    """A manifest declares an unsupported schema version."""


class ManifestError(CbbError):
    """A manifest row is malformed or references a missing file."""


class MissingCondition(CbbError):
    """Human data or a record set lacks one of the required conditions."""


class DomainError(CbbError, ValueError):
    """A metric was called with arguments outside its domain."""
