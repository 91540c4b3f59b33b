"""Exception and warning types shared across the toolkit.

The CLI maps these to exit codes: ValidationError and its subclasses -> 1,
ParseError -> 2, infeasible/degenerate computation errors -> 3.
"""


class OvpostError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(OvpostError):
    """A value violates a documented domain constraint."""


class ParseError(OvpostError):
    """A file could not be parsed; message carries position and reason."""


class DomainError(ValidationError):
    """A numeric argument lies outside its stated domain."""


class DegenerateInput(OvpostError):
    """Both boxes of an IoU query have zero area."""


class DegenerateBox(OvpostError):
    """The first argument of an overlap-area-ratio query has zero area."""


class InvalidThreshold(ValidationError):
    """Suppression threshold outside (0, 1]."""


class ZeroVector(ValidationError):
    """An embedding with zero L2 norm cannot be normalized."""


class MissingSceneEmbedding(OvpostError):
    """A prompted scene name is absent from the scene embedding table."""


class InsufficientScenes(OvpostError):
    """A scene context holds fewer ranked scenes than requested."""


class DimensionMismatch(ValidationError):
    """Embedding dimensions disagree."""


class MissingCategory(OvpostError):
    """A detection's category has no entry in the re-score table."""


class DuplicateName(ValidationError):
    """An embedding table contains a repeated entry name."""


class UnknownCategory(OvpostError):
    """A detection's category belongs to neither split."""


class InfeasibleSample(OvpostError):
    """Image bounds preclude the requested sample after max_attempts."""


class InfeasibleSpec(ValidationError):
    """A synthetic-world spec cannot be realized."""


class EmptySplit(OvpostError):
    """A requested category split has no category with ground truths."""


class FormatWarning(UserWarning):
    """A record was rejected or repaired while loading a file."""


class DegenerateSimilaritiesWarning(UserWarning):
    """All categories equidistant from the background embedding."""
