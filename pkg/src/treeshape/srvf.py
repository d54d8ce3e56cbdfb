"""Square-root-velocity geometry of branch shapes.

A branch (curve + thickness) maps to its velocity-normalized transform: the
4D curve [f, c*r] is differenced over the uniform grid and each increment is
divided by the square root of its own norm. Bending and stretching then
become the flat L2 geometry of these transforms.

Discretization: a branch with N nodes yields N-1 transform samples, one per
grid interval (forward differences). The transform and its inverse are exact
mutual inverses on this grid, and the interval-sum quadrature integrates
constants exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    GridMismatch,
    InvalidRotation,
    InvalidWarp,
    StructureMismatch,
)
from .model import Branch, Tree, AttachedSubtree

_ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class MetricWeights:
    """Relative costs of deforming the main branch (``lambda_m``), deforming
    attached subtrees (``lambda_s``), and sliding attachment points
    (``lambda_p``)."""

    lambda_m: float = 1.0
    lambda_s: float = 1.0
    lambda_p: float = 1.0

    def __post_init__(self):
        lams = (self.lambda_m, self.lambda_s, self.lambda_p)
        if any(l < 0 for l in lams):
            raise DomainError("metric weights must be nonnegative")
        if not any(lams):
            raise DomainError("metric weights must not all be zero")

    @classmethod
    def botanical(cls) -> "MetricWeights":
        return cls(1.0, 1.0, 1.0)

    @classmethod
    def neuronal(cls) -> "MetricWeights":
        return cls(0.2, 1.0, 0.2)


@dataclass(frozen=True)
class QBranch:
    """Transform of one branch: ``q`` is (N-1, 4) interval samples (3 spatial
    + 1 thickness component), ``c`` the thickness weight used to build it,
    ``r0`` the base thickness (needed for exact reconstruction)."""

    q: np.ndarray
    c: float = 1.0
    r0: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 2 or q.shape[1] != 4 or q.shape[0] < 1:
            raise DomainError(f"q must be (M, 4) with M >= 1, got {q.shape}")
        object.__setattr__(self, "q", q)

    @property
    def m(self) -> int:
        """Number of interval samples (branch node count minus one)."""
        return self.q.shape[0]

    @property
    def is_null(self) -> bool:
        return not np.any(self.q)


@dataclass(frozen=True)
class SrvftChild:
    s: float
    subtree: "SRVFT"


@dataclass(frozen=True)
class SRVFT:
    """Recursive transform of a whole tree: the main branch's transform, the
    transformed subtrees with their attachment parameters, and the 3D start
    point of the main branch (kept so reconstruction is exact rather than
    up-to-translation)."""

    q0: QBranch
    children: list[SrvftChild] = field(default_factory=list)
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))

    @property
    def depth(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.subtree.depth for c in self.children)

    @property
    def grid(self) -> int:
        return self.q0.m

    @property
    def is_null(self) -> bool:
        return self.q0.is_null and all(c.subtree.is_null for c in self.children)


def _zero_eps(arc_length: float) -> float:
    # scale-aware guard for the zero-velocity case
    return 1e-12 * (arc_length + 1.0)


def _sqrt_normalize(d: np.ndarray, eps: float) -> np.ndarray:
    norms = np.linalg.norm(d, axis=1)
    q = np.zeros_like(d)
    ok = norms > eps
    q[ok] = d[ok] / np.sqrt(norms[ok])[:, None]
    return q


def esrvf(b: Branch, c: float = 1.0) -> QBranch:
    """Transform a branch into its (N-1, 4) velocity representation.

    ``c`` weighs the thickness channel; c = 0 drops thickness entirely.
    A null branch maps to the zero transform.
    """
    g = np.column_stack([b.points, c * b.radii])
    h = 1.0 / (b.n - 1)
    d = np.diff(g, axis=0) / h
    return QBranch(_sqrt_normalize(d, _zero_eps(b.arc_length)), c, float(b.radii[0]))


def _nodes_from_q(q: QBranch, origin4: np.ndarray) -> np.ndarray:
    """Integrate q*|q| from a 4D start point back to (M+1, 4) curve nodes."""
    h = 1.0 / q.m
    d = q.q * np.linalg.norm(q.q, axis=1)[:, None]
    nodes = np.empty((q.m + 1, 4))
    nodes[0] = origin4
    nodes[1:] = origin4 + np.cumsum(d * h, axis=0)
    return nodes


def inverse_esrvf(q: QBranch, origin=(0.0, 0.0, 0.0), c: float | None = None) -> Branch:
    """Reconstruct the branch whose transform is ``q``, starting at ``origin``.

    Thickness is recovered from the 4th component divided by ``c`` (taken
    from the transform when not given) and clamped at zero; with c = 0 the
    reconstructed radii are zero.
    """
    c = q.c if c is None else c
    r0 = q.r0 if c > 0 else 0.0
    origin4 = np.concatenate([np.asarray(origin, float), [c * r0]])
    nodes = _nodes_from_q(q, origin4)
    radii = np.maximum(nodes[:, 3] / c, 0.0) if c > 0 else np.zeros(q.m + 1)
    return Branch(nodes[:, :3], radii)


def qdist(q1: QBranch, q2: QBranch) -> float:
    """L2 distance between two transforms on the same grid."""
    if q1.m != q2.m:
        raise GridMismatch(f"grids differ: {q1.m} vs {q2.m}")
    return float(np.sqrt(np.sum((q1.q - q2.q) ** 2) / q1.m))


def qnorm(q: QBranch) -> float:
    return float(np.sqrt(np.sum(q.q**2) / q.m))


def check_rotation(O: np.ndarray) -> np.ndarray:
    O = np.asarray(O, dtype=float)
    if O.shape != (3, 3):
        raise InvalidRotation(f"expected 3x3 matrix, got {O.shape}")
    if np.abs(O @ O.T - np.eye(3)).max() > _ROTATION_TOL:
        raise InvalidRotation("matrix is not orthogonal")
    if abs(np.linalg.det(O) - 1.0) > _ROTATION_TOL:
        raise InvalidRotation("matrix is not orientation-preserving")
    return O


def rotate_q(q: QBranch, O: np.ndarray) -> QBranch:
    """Rotate the spatial components; the thickness channel is untouched."""
    O = check_rotation(O)
    out = q.q.copy()
    out[:, :3] = q.q[:, :3] @ O.T
    return QBranch(out, q.c, q.r0)


def check_warp(gamma: np.ndarray, m: int | None = None) -> np.ndarray:
    gamma = np.asarray(getattr(gamma, "values", gamma), dtype=float)
    if gamma.ndim != 1 or gamma.size < 2:
        raise InvalidWarp("warp must be a 1D array of node values")
    if m is not None and gamma.size != m + 1:
        raise GridMismatch(f"warp has {gamma.size} nodes, expected {m + 1}")
    if abs(gamma[0]) > 1e-9 or abs(gamma[-1] - 1.0) > 1e-9:
        raise InvalidWarp("warp must fix the endpoints 0 and 1")
    if np.any(np.diff(gamma) < -1e-12):
        raise InvalidWarp("warp must be nondecreasing")
    return np.clip(gamma, 0.0, 1.0)


def reparam_q(q: QBranch, gamma) -> QBranch:
    """Act on a transform by a reparameterization.

    Equivalent to rebuilding the underlying polyline, resampling it at the
    warped parameter values, and transforming again, so the transform of a
    warped branch and the warped transform of the branch agree exactly.
    """
    gamma = check_warp(gamma, q.m)
    nodes = _nodes_from_q(q, np.zeros(4))
    u = np.linspace(0.0, 1.0, q.m + 1)
    warped = np.column_stack([np.interp(gamma, u, nodes[:, k]) for k in range(4)])
    d = np.diff(warped, axis=0) * q.m
    arc = float(np.linalg.norm(np.diff(warped[:, :3], axis=0), axis=1).sum())
    return QBranch(_sqrt_normalize(d, _zero_eps(arc)), q.c, q.r0)


def tree_to_srvft(t: Tree, c: float = 1.0) -> SRVFT:
    """Transform every branch of a tree, keeping the recursive structure."""
    children = [SrvftChild(ch.s, tree_to_srvft(ch.tree, c)) for ch in t.children]
    return SRVFT(esrvf(t.main, c), children, t.main.points[0].copy())


def srvft_to_tree(Q: SRVFT) -> Tree:
    """Invert the tree transform.

    Each subtree's curve is reconstructed so its start point lies on the
    parent curve at the subtree's attachment parameter.
    """
    main = inverse_esrvf(Q.q0, Q.origin)
    u = np.linspace(0.0, 1.0, main.n)
    children = []
    for ch in Q.children:
        anchor = np.array([np.interp(ch.s, u, main.points[:, k]) for k in range(3)])
        sub = srvft_to_tree(SRVFT(ch.subtree.q0, ch.subtree.children, anchor))
        children.append(AttachedSubtree(float(np.clip(ch.s, 0.0, 1.0)), sub))
    return Tree(main, children)


def rotate_srvft(Q: SRVFT, O: np.ndarray) -> SRVFT:
    """Apply one global rotation to every branch (and the root start point)."""
    O = check_rotation(O)
    children = [SrvftChild(c.s, rotate_srvft(c.subtree, O)) for c in Q.children]
    return SRVFT(rotate_q(Q.q0, O), children, O @ Q.origin)


def map_structure(Q1: SRVFT, Q2: SRVFT):
    """Yield matched (node1, node2, depth) pairs; structures must be identical."""

    def rec(a: SRVFT, b: SRVFT, depth: int):
        if a.grid != b.grid:
            raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")
        if len(a.children) != len(b.children):
            raise StructureMismatch(
                f"child counts differ at depth {depth}: "
                f"{len(a.children)} vs {len(b.children)}"
            )
        yield a, b, depth
        for ca, cb in zip(a.children, b.children):
            yield from rec(ca.subtree, cb.subtree, depth + 1)

    yield from rec(Q1, Q2, 0)
