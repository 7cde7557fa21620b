"""Exception types shared across the package."""


class SkycatError(Exception):
    """Base class for all skycat errors."""


class DomainError(SkycatError, ValueError):
    """An argument is outside its documented domain."""


class MalformedIDError(SkycatError, ValueError):
    """A trixel ID does not have a valid bit pattern."""


class InvalidPolygonError(SkycatError, ValueError):
    """Polygon vertices are non-convex or wound the wrong way."""


class NotFoundError(SkycatError):
    """Unknown table, view, object, or load event."""


class IntegrityError(SkycatError):
    """A row violates a schema constraint (FK, null, duplicate key, ...)."""


class DependencyError(SkycatError):
    """Undo refused because later rows still reference the load."""


class AlreadyUndoneError(SkycatError):
    """The load event was already undone."""


class ConcurrentLoadError(SkycatError):
    """Another load is in progress for the same table."""


class SnapshotFormatError(SkycatError):
    """Snapshot file is corrupt, truncated, or has the wrong version."""


class FilterError(SkycatError):
    """Base for filter-expression errors; carries a source position."""

    def __init__(self, message, line=1, col=1):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self):
        return "%s (line %d, col %d)" % (self.message, self.line, self.col)


class FilterSyntaxError(FilterError):
    """Tokenizer or parser failure; lists the expected tokens."""

    def __init__(self, message, line=1, col=1, expected=()):
        super().__init__(message, line, col)
        self.expected = tuple(expected)


class FilterTypeError(FilterError):
    """Unknown column or ill-typed subexpression."""
