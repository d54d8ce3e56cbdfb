"""Exception types raised across the package."""


class TreeShapeError(Exception):
    """Base class for all treeshape errors."""


class DegenerateTree(TreeShapeError):
    """Tree whose main branch has zero arc length."""


class DegenerateBranch(TreeShapeError):
    """Non-null branch with zero arc length."""


class DisconnectedSkeleton(TreeShapeError):
    """Skeleton graph is not connected from the designated root."""


class CyclicSkeleton(TreeShapeError):
    """Skeleton graph contains a cycle; only trees are supported."""


class GridMismatch(TreeShapeError):
    """Two discretized objects do not share the same sample grid."""


class InvalidRotation(TreeShapeError):
    """Matrix is not a proper rotation (orthogonal, det +1)."""


class InvalidWarp(TreeShapeError):
    """Reparameterization is not a monotone [0,1] -> [0,1] map."""


class StructureMismatch(TreeShapeError):
    """Operation requires structurally identical trees."""


class EmptyCollection(TreeShapeError):
    """Operation requires at least one input shape."""


class DomainError(TreeShapeError, ValueError):
    """Argument outside its valid domain."""


class ParseError(TreeShapeError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedVersion(TreeShapeError):
    """File declares a format version this build does not understand."""


class SchemaError(TreeShapeError):
    """File violates the expected document schema."""
