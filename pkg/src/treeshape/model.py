"""Recursive tree representation: branches with thickness, normalization,
resampling, ordering, and null-branch padding.

A branch is a discretized 3D skeletal curve with a per-point thickness.
A tree is a main branch plus subtrees attached along it at arc-length
fractions in [0, 1]; the structure nests recursively.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CyclicSkeleton,
    DegenerateBranch,
    DegenerateTree,
    DisconnectedSkeleton,
    DomainError,
)

#: Deepest branch level kept after ingestion (level 0 = trunk).
MAX_LEVELS = 4

_NULL_TOL = 1e-12


@dataclass(frozen=True)
class Branch:
    """A skeletal curve: ``points`` is (N, 3), ``radii`` is (N,) aligned with it.

    Points are samples at parameter values k/(N-1). Radii are nonnegative;
    a *null* branch has all points identical and all radii zero.
    """

    points: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        rad = np.asarray(self.radii, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DomainError(f"points must be (N, 3), got {pts.shape}")
        if pts.shape[0] < 2:
            raise DomainError("a branch needs at least 2 points")
        if rad.shape != (pts.shape[0],):
            raise DomainError("radii length must match points length")
        if np.any(rad < 0):
            raise DomainError("radii must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "radii", rad)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def arc_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())

    @property
    def is_null(self) -> bool:
        scale = 1.0 + float(np.abs(self.points[0]).max())
        return self.arc_length <= _NULL_TOL * scale and not np.any(self.radii)


@dataclass(frozen=True)
class AttachedSubtree:
    """A subtree hanging off its parent's main branch at arc fraction ``s``."""

    s: float
    tree: "Tree"

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise DomainError(f"attachment parameter {self.s} outside [0, 1]")


@dataclass(frozen=True)
class Tree:
    """Main branch plus attached subtrees, nested recursively."""

    main: Branch
    children: list[AttachedSubtree] = field(default_factory=list)

    @property
    def depth(self) -> int:
        """Number of branch levels (a bare branch has depth 1)."""
        if not self.children:
            return 1
        return 1 + max(c.tree.depth for c in self.children)

    @property
    def branch_count(self) -> int:
        return 1 + sum(c.tree.branch_count for c in self.children)

    def branches(self):
        """Yield (path, Branch) pairs in depth-first order.

        The path is the sequence of child slot indices from the root; the
        root's main branch has path ().
        """
        yield (), self.main
        for i, c in enumerate(self.children):
            for path, b in c.tree.branches():
                yield (i, *path), b


def null_branch(anchor, n: int = 2) -> Branch:
    """Zero-length branch: ``n`` copies of ``anchor`` with zero radii."""
    anchor = np.asarray(anchor, dtype=float)
    return Branch(np.tile(anchor, (n, 1)), np.zeros(n))


def null_tree(anchor, n: int = 2) -> Tree:
    return Tree(null_branch(anchor, n), [])


def is_null_tree(t: Tree) -> bool:
    return t.main.is_null and all(is_null_tree(c.tree) for c in t.children)


def _cumulative_arc(points: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def point_at(branch: Branch, s: float) -> np.ndarray:
    """Point at arc-length fraction ``s`` along the branch polyline."""
    if branch.is_null:
        return branch.points[0].copy()
    arc = _cumulative_arc(branch.points)
    u = arc / arc[-1]
    return np.array([np.interp(s, u, branch.points[:, k]) for k in range(3)])


def _translate(tree: Tree, offset: np.ndarray) -> Tree:
    main = Branch(tree.main.points + offset, tree.main.radii)
    children = [AttachedSubtree(c.s, _translate(c.tree, offset)) for c in tree.children]
    return Tree(main, children)


def _scale(tree: Tree, factor: float) -> Tree:
    main = Branch(tree.main.points * factor, tree.main.radii * factor)
    children = [AttachedSubtree(c.s, _scale(c.tree, factor)) for c in tree.children]
    return Tree(main, children)


def normalize(tree: Tree, scale_invariant: bool = True) -> Tree:
    """Translate the tree so its trunk starts at the origin and, optionally,
    scale it so the trunk has unit arc length.

    Every coordinate and radius is divided by the same factor, so attachment
    geometry is preserved. Raises :class:`DegenerateTree` if the trunk has
    zero arc length.
    """
    length = tree.main.arc_length
    if length <= _NULL_TOL:
        raise DegenerateTree("main branch has zero arc length")
    out = _translate(tree, -tree.main.points[0])
    if scale_invariant:
        out = _scale(out, 1.0 / length)
    return out


def resample_branch(b: Branch, n: int) -> Branch:
    """Resample to ``n`` points at uniform arc-length spacing.

    Radii are linearly interpolated; both endpoints are preserved exactly.
    A null branch resamples to ``n`` copies of its anchor.
    """
    if n < 2:
        raise DomainError("need at least 2 samples")
    if b.is_null:
        return null_branch(b.points[0], n)
    arc = _cumulative_arc(b.points)
    total = arc[-1]
    if total <= _NULL_TOL * (1.0 + float(np.abs(b.points[0]).max())):
        raise DegenerateBranch("zero-length branch with nonzero radii")
    u = arc / total
    # drop zero-length segments so the interpolation abscissa is strictly increasing
    keep = np.concatenate([[True], np.diff(u) > 0])
    u, pts, rad = u[keep], b.points[keep], b.radii[keep]
    target = np.linspace(0.0, 1.0, n)
    out_pts = np.column_stack([np.interp(target, u, pts[:, k]) for k in range(3)])
    out_rad = np.interp(target, u, rad)
    out_pts[0], out_pts[-1] = b.points[0], b.points[-1]
    out_rad[0], out_rad[-1] = b.radii[0], b.radii[-1]
    return Branch(out_pts, out_rad)


def resample_tree(t: Tree, n: int) -> Tree:
    """Resample every branch in the tree to ``n`` uniform arc-length samples."""
    main = resample_branch(t.main, n)
    children = [AttachedSubtree(c.s, resample_tree(c.tree, n)) for c in t.children]
    return Tree(main, children)


def tree_order(tree: Tree) -> list[int]:
    """Per-level maximum subtree count.

    Element k is the largest number of children attached to any branch at
    level k; a bare branch gives ``[0]``.
    """
    counts: list[int] = []
    frontier = [tree]
    while frontier:
        counts.append(max(len(t.children) for t in frontier))
        frontier = [c.tree for t in frontier for c in t.children]
    return counts


def _pairwise_orders(t1: Tree, t2: Tree) -> list[int]:
    o1, o2 = tree_order(t1), tree_order(t2)
    depth = max(len(o1), len(o2))
    return [
        max(o1[k] if k < len(o1) else 0, o2[k] if k < len(o2) else 0)
        for k in range(depth)
    ]


def _match_children_by_s(c1: list[AttachedSubtree], c2: list[AttachedSubtree]):
    """Greedy injective pairing by nearest attachment parameter.

    Returns pairs of indices plus leftover indices on each side; ties break
    deterministically on the index pair.
    """
    candidates = sorted(
        ((abs(a.s - b.s), i, j) for i, a in enumerate(c1) for j, b in enumerate(c2)),
        key=lambda t: (t[0], t[1], t[2]),
    )
    used1: set[int] = set()
    used2: set[int] = set()
    pairs = []
    for _, i, j in candidates:
        if i in used1 or j in used2:
            continue
        pairs.append((i, j))
        used1.add(i)
        used2.add(j)
    left1 = [i for i in range(len(c1)) if i not in used1]
    left2 = [j for j in range(len(c2)) if j not in used2]
    return pairs, left1, left2


def _pad_pair(n1: Tree, n2: Tree, counts: list[int], level: int) -> tuple[Tree, Tree]:
    target = counts[level] if level < len(counts) else 0
    pairs, left1, left2 = _match_children_by_s(n1.children, n2.children)

    # (child1 | None, child2 | None) per padded slot, ordered by attachment
    slots: list[tuple[AttachedSubtree | None, AttachedSubtree | None, float]] = []
    for i, j in pairs:
        a, b = n1.children[i], n2.children[j]
        slots.append((a, b, min(a.s, b.s)))
    for i in left1:
        slots.append((n1.children[i], None, n1.children[i].s))
    for j in left2:
        slots.append((None, n2.children[j], n2.children[j].s))
    while len(slots) < target:
        slots.append((None, None, 0.5))
    slots.sort(key=lambda t: t[2])

    out1, out2 = [], []
    for a, b, _ in slots:
        s1 = a.s if a is not None else (b.s if b is not None else 0.5)
        s2 = b.s if b is not None else s1
        n_pts = (a or b).tree.main.n if (a or b) is not None else n1.main.n
        t1 = a.tree if a is not None else null_tree(point_at(n1.main, s1), n_pts)
        t2 = b.tree if b is not None else null_tree(point_at(n2.main, s2), n_pts)
        p1, p2 = _pad_pair(t1, t2, counts, level + 1)
        out1.append(AttachedSubtree(s1, p1))
        out2.append(AttachedSubtree(s2, p2))
    return Tree(n1.main, out1), Tree(n2.main, out2)


def pad_null_branches(t1: Tree, t2: Tree) -> tuple[Tree, Tree]:
    """Pad both trees with null branches so they share identical per-level
    subtree counts.

    Every branch at level k ends up with the same number of children: the
    maximum found at that level in either tree. Added null branches copy the
    attachment parameter of the real branch they are provisionally paired
    with (nearest-s), so the initial position cost against that pairing is
    zero; the pairing is re-optimized during alignment. Real-branch geometry
    is never modified.
    """
    counts = _pairwise_orders(t1, t2)
    return _pad_pair(t1, t2, counts, 0)


def pad_to_counts(t: Tree, counts: list[int], level: int = 0) -> Tree:
    """Pad a single tree so every level-k branch has ``counts[k+1]`` children.

    Null branches copy the nearest real sibling's attachment parameter, or
    sit at 0.5 when the branch has no real children. Used when more than two
    trees must share one structure (means, PCA).
    """
    target = counts[level] if level < len(counts) else 0
    children = [
        AttachedSubtree(c.s, pad_to_counts(c.tree, counts, level + 1))
        for c in t.children
    ]
    real_s = [c.s for c in t.children]
    while len(children) < target:
        s = min(real_s, key=lambda v: abs(v - 0.5)) if real_s else 0.5
        anchor = point_at(t.main, s)
        children.append(
            AttachedSubtree(s, pad_to_counts(null_tree(anchor, t.main.n), counts, level + 1))
        )
    children.sort(key=lambda c: c.s)
    return Tree(t.main, children)


def flatten_depth(tree: Tree, max_levels: int = MAX_LEVELS) -> Tree:
    """Reattach subtrees deeper than ``max_levels`` to a shallower ancestor.

    A subtree rooted below the deepest allowed level climbs to its
    grandparent, attached at its former parent's attachment parameter,
    until it is legal. Emits a warning when anything moves.
    """
    if tree.depth <= max_levels:
        return tree
    warnings.warn(
        f"tree has {tree.depth} levels; flattening to {max_levels}", stacklevel=2
    )

    def build(t: Tree, level: int) -> Tree:
        children: list[AttachedSubtree] = []
        for c in t.children:
            if level + 1 >= max_levels:
                # this child may keep no children of its own: hoist them here
                hoisted = _hoist(c.tree, c.s)
                children.extend(
                    AttachedSubtree(s, Tree(sub.main, [])) for s, sub in hoisted
                )
            else:
                children.append(AttachedSubtree(c.s, build(c.tree, level + 1)))
        children.sort(key=lambda c: c.s)
        return Tree(t.main, children)

    def _hoist(t: Tree, s: float) -> list[tuple[float, Tree]]:
        out = [(s, t)]
        for c in t.children:
            out.extend(_hoist(c.tree, s))
        return out

    return build(tree, 1)


@dataclass(frozen=True)
class CurveSoup:
    """A connected skeleton graph: shared points, per-point radii, undirected
    edges between point indices, and a designated root point."""

    points: np.ndarray
    radii: np.ndarray
    edges: list[tuple[int, int]]
    root: int


def _turning_score(points: np.ndarray) -> float:
    """Total turning angle per unit arc length along a polyline."""
    seg = np.diff(points, axis=0)
    norms = np.linalg.norm(seg, axis=1)
    keep = norms > _NULL_TOL
    seg, norms = seg[keep], norms[keep]
    if len(seg) < 2:
        return 0.0
    cosang = np.sum(seg[:-1] * seg[1:], axis=1) / (norms[:-1] * norms[1:])
    angles = np.arccos(np.clip(cosang, -1.0, 1.0))
    return float(angles.sum() / norms.sum())


def select_main_branch(soup: CurveSoup, mode: str = "neuronal") -> Tree:
    """Build a Tree from a skeleton graph by picking a root-to-tip main path.

    ``neuronal`` picks the longest root-to-leaf path; ``botanical`` picks the
    least bent one (smallest total turning angle per unit length). The choice
    recurses into every subtree hanging off the selected path.
    """
    if mode not in ("neuronal", "botanical"):
        raise DomainError(f"unknown mode {mode!r}")
    pts, rad = np.asarray(soup.points, float), np.asarray(soup.radii, float)
    adj: dict[int, list[int]] = {}
    for a, b in soup.edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    if soup.root not in adj:
        raise DisconnectedSkeleton("root has no incident edges")

    # orient edges away from the root, rejecting cycles and disconnection
    parent: dict[int, int] = {soup.root: -1}
    ordered_children: dict[int, list[int]] = {}
    stack = [soup.root]
    while stack:
        v = stack.pop()
        kids = []
        for u in sorted(adj[v]):
            if u == parent[v]:
                continue
            if u in parent:
                raise CyclicSkeleton("skeleton contains a cycle")
            parent[u] = v
            kids.append(u)
            stack.append(u)
        ordered_children[v] = kids
    if len(parent) != len(adj):
        raise DisconnectedSkeleton(
            f"{len(adj) - len(parent)} skeleton points unreachable from root"
        )

    def junctions_from(v: int) -> list[list[int]]:
        """Maximal unbranched runs starting at v, each ending at a leaf or junction."""
        runs = []
        for u in ordered_children[v]:
            run = [v, u]
            while len(ordered_children[run[-1]]) == 1:
                run.append(ordered_children[run[-1]][0])
            runs.append(run)
        return runs

    def best_path(v: int) -> list[int]:
        """Root-to-leaf node path minimizing the mode's score."""
        paths: list[list[int]] = []

        def walk(node: int, acc: list[int]):
            runs = junctions_from(node)
            if not runs:
                paths.append(acc)
                return
            for run in runs:
                walk(run[-1], acc + run[1:])

        walk(v, [v])
        if mode == "neuronal":
            # longest wins; negate so min() picks it
            key = lambda p: (-_cumulative_arc(pts[p])[-1],)
        else:
            key = lambda p: (_turning_score(pts[p]),)
        return min(paths, key=key)

    def build(v: int) -> Tree:
        path = best_path(v)
        main = Branch(pts[path], rad[path])
        arc = _cumulative_arc(pts[path])
        children: list[AttachedSubtree] = []
        on_path = set(path)
        for k, node in enumerate(path):
            for u in ordered_children[node]:
                if u in on_path:
                    continue
                s = float(arc[k] / arc[-1]) if arc[-1] > 0 else 0.0
                children.append(AttachedSubtree(s, _build_from_edge(node, u)))
        children.sort(key=lambda c: c.s)
        return Tree(main, children)

    def _build_from_edge(junction: int, first: int) -> Tree:
        # subtree rooted at `junction` whose first step is the edge to `first`
        saved = ordered_children[junction]
        ordered_children[junction] = [first]
        try:
            return build(junction)
        finally:
            ordered_children[junction] = saved

    if not ordered_children[soup.root]:
        raise DegenerateTree("root is isolated")
    return build(soup.root)
