"""Statistics on collections of tree shapes: mean, principal modes of
variation, random synthesis, and reflection-symmetry analysis.

All computations run in the flat transform space: trees are padded to one
common structure, registered onto a running mean, and averaged coordinate-
wise. Coordinates are scaled so that the Euclidean norm equals the tree
metric, making eigenvalues variances in metric units.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, EmptyCollection
from .metric import (
    AlignOptions,
    adopt_null_positions,
    eval_geodesic,
    geodesic,
    tree_distance,
)
from .model import AttachedSubtree, Branch, Tree, flatten_depth, normalize, pad_to_counts, resample_tree, tree_order
from .srvf import SRVFT, MetricWeights, QBranch, SrvftChild, srvft_to_tree, tree_to_srvft


# ---------------------------------------------------------------------------
# common structure and flat coordinates


def _common_counts(trees: list[Tree]) -> list[int]:
    orders = [tree_order(t) for t in trees]
    depth = max(len(o) for o in orders)
    return [max(o[k] if k < len(o) else 0 for o in orders) for k in range(depth)]


def _prepare_collection(trees: list[Tree], options: AlignOptions) -> list[Tree]:
    out = []
    for t in trees:
        t = normalize(t, scale_invariant=options.scale_normalize)
        t = flatten_depth(t, options.max_levels)
        out.append(resample_tree(t, options.samples_per_branch))
    counts = _common_counts(out)
    return [pad_to_counts(t, counts) for t in out]


def _average_srvfts(srvfts: list[SRVFT]) -> SRVFT:
    q = np.mean([Q.q0.q for Q in srvfts], axis=0)
    r0 = float(np.mean([Q.q0.r0 for Q in srvfts]))
    origin = np.mean([Q.origin for Q in srvfts], axis=0)
    children = []
    for i in range(len(srvfts[0].children)):
        s = float(np.mean([Q.children[i].s for Q in srvfts]))
        sub = _average_srvfts([Q.children[i].subtree for Q in srvfts])
        children.append(SrvftChild(min(max(s, 0.0), 1.0), sub))
    return SRVFT(QBranch(q, srvfts[0].q0.c, r0), children, origin)


def _flatten(Q: SRVFT) -> np.ndarray:
    """Fixed flattening order: main-branch q row-major, then per child slot
    its attachment parameter followed by the child's own flattening."""
    parts = [Q.q0.q.ravel()]
    for c in Q.children:
        parts.append(np.array([c.s]))
        parts.append(_flatten(c.subtree))
    return np.concatenate(parts)


def _flat_weights(Q: SRVFT, w: MetricWeights, depth: int = 0) -> np.ndarray:
    h = 1.0 / Q.grid
    parts = [np.full(Q.q0.q.size, np.sqrt(w.lambda_m * w.lambda_s**depth * h))]
    for c in Q.children:
        parts.append(np.array([np.sqrt(w.lambda_p * w.lambda_s**depth)]))
        parts.append(_flat_weights(c.subtree, w, depth + 1))
    return np.concatenate(parts)


def _unflatten(x: np.ndarray, template: SRVFT) -> tuple[SRVFT, int]:
    size = template.q0.q.size
    q = x[:size].reshape(template.q0.q.shape)
    pos = size
    children = []
    for c in template.children:
        s = float(np.clip(x[pos], 0.0, 1.0))
        pos += 1
        sub, used = _unflatten(x[pos:], c.subtree)
        pos += used
        children.append(SrvftChild(s, sub))
    node = SRVFT(QBranch(q, template.q0.c, template.q0.r0), children, template.origin)
    return node, pos


# ---------------------------------------------------------------------------
# Karcher mean


def _karcher(trees, w, tol, max_iter, options):
    from .registration import align_trees, apply_alignment, identity_alignment

    if not trees:
        raise EmptyCollection("need at least one tree")
    w = w or MetricWeights()
    options = options or AlignOptions()
    prepared = _prepare_collection(list(trees), options)
    evals = [tree_to_srvft(p, options.thickness_weight) for p in prepared]
    if len(evals) == 1:
        return evals[0], [identity_alignment(evals[0])], [evals[0]], [0.0]
    matches = [tree_to_srvft(p, options.match_thickness_weight) for p in prepared]

    mu = evals[0]
    best = None
    history: list[float] = []
    for _ in range(max_iter):
        mu_match = tree_to_srvft(srvft_to_tree(mu), options.match_thickness_weight)
        aligned, alignments, objective = [], [], 0.0
        for Qm, Qe in zip(matches, evals):
            al = align_trees(mu_match, Qm, w, n_max=options.iterations, tol=options.tol)
            moved = apply_alignment(mu, Qe, al)
            _, b = adopt_null_positions(mu, moved)
            d = tree_distance(mu, b, w)
            aligned.append(b)
            alignments.append(replace(al, distance=d))
            objective += d * d
        if best is not None and objective > best[3] + 1e-12:
            break
        mu_new = _average_srvfts(aligned)
        improved = history[-1] - objective if history else np.inf
        best = (mu_new, alignments, aligned, objective)
        history.append(objective)
        if improved < tol * max(history[0], 1e-30):
            break
        mu = mu_new
    mean, alignments, aligned, _ = best
    return mean, alignments, aligned, history


def karcher_mean(
    trees,
    w: MetricWeights | None = None,
    tol: float = 1e-6,
    max_iter: int = 20,
    options: AlignOptions | None = None,
):
    """Mean shape of a collection: the transform minimizing the sum of
    squared distances, found by alternating registration and averaging.

    Returns the mean and each input's alignment onto it; the objective is
    nonincreasing over the outer iterations.
    """
    mean, alignments, _, _ = _karcher(trees, w, tol, max_iter, options)
    return mean, alignments


# ---------------------------------------------------------------------------
# principal component model


@dataclass(frozen=True)
class CoordinateLayout:
    """Flattening metadata: per-entry scale factors that make the Euclidean
    norm of a coordinate vector equal the tree metric."""

    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class ShapeModel:
    """Gaussian shape model: mean transform plus eigenvalues/eigenvectors of
    the sample covariance in flat coordinates."""

    mean: SRVFT
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sample_count: int
    layout: CoordinateLayout
    weights: MetricWeights

    def cumulative_ratios(self) -> np.ndarray:
        total = float(self.eigenvalues.sum())
        if total <= 0.0:
            return np.ones_like(self.eigenvalues)
        return np.cumsum(self.eigenvalues) / total


def fit_pca(
    trees,
    w: MetricWeights | None = None,
    options: AlignOptions | None = None,
    tol: float = 1e-6,
    max_iter: int = 20,
) -> ShapeModel:
    """Fit mean + principal modes to a collection of at least two trees.

    The covariance spectrum is taken from the SVD of the centered coordinate
    matrix (never materializing the full covariance); at most m - 1 modes
    are kept and any training sample is reproduced exactly by its full
    coefficient vector.
    """
    trees = list(trees)
    if len(trees) < 2:
        raise DomainError("principal component fit needs at least 2 trees")
    w = w or MetricWeights()
    mean, _, aligned, _ = _karcher(trees, w, tol, max_iter, options)
    wvec = _flat_weights(mean, w)
    mu_x = _flatten(mean) * wvec
    V = np.stack([_flatten(Q) * wvec for Q in aligned]) - mu_x
    _, S, Vh = np.linalg.svd(V, full_matrices=False)
    k = len(trees) - 1
    eigenvalues = np.maximum(S[:k] ** 2 / (len(trees) - 1), 0.0)
    return ShapeModel(mean, eigenvalues, Vh[:k], len(trees), CoordinateLayout(wvec), w)


def project(model: ShapeModel, Q: SRVFT) -> np.ndarray:
    """Coefficients of a transform in the model's principal directions,
    scaled so that feeding them back to :func:`synthesize` reproduces it."""
    v = _flatten(Q) * model.layout.weights - _flatten(model.mean) * model.layout.weights
    raw = model.eigenvectors @ v
    scale = np.sqrt(model.eigenvalues)
    out = np.zeros_like(raw)
    ok = scale > 1e-150
    out[ok] = raw[ok] / scale[ok]
    return out


def model_to_srvft(model: ShapeModel, coefficients: np.ndarray) -> SRVFT:
    """Transform at the given coefficients: mean + sum a_i sqrt(l_i) V_i."""
    a = np.asarray(coefficients, dtype=float)
    if a.size > model.eigenvalues.size:
        raise DomainError(
            f"{a.size} coefficients but only {model.eigenvalues.size} modes"
        )
    flat = _flatten(model.mean).copy()
    if a.size and np.any(a):
        delta = (a * np.sqrt(model.eigenvalues[: a.size])) @ model.eigenvectors[: a.size]
        wvec = model.layout.weights
        np.divide(delta, wvec, out=delta, where=wvec > 0)
        flat += delta
    node, used = _unflatten(flat, model.mean)
    assert used == flat.size
    return node


def synthesize(
    model: ShapeModel,
    coefficients=None,
    *,
    seed: int | None = None,
    k: int | None = None,
    clamp: float | None = None,
) -> Tree:
    """Sample a tree from the model.

    With explicit coefficients the tree is deterministic; otherwise ``k``
    standard-normal coefficients are drawn from a counter-based generator
    seeded with ``seed`` (``k`` defaults to the smallest count covering 99%
    of the spectrum) and optionally clamped to ``[-clamp, clamp]``. All-zero
    coefficients reproduce the mean tree exactly.
    """
    if coefficients is None:
        if k is None:
            ratios = model.cumulative_ratios()
            k = int(np.searchsorted(ratios, 0.99) + 1)
            k = min(k, model.eigenvalues.size)
        elif k > model.eigenvalues.size:
            raise DomainError(f"k = {k} exceeds {model.eigenvalues.size} modes")
        rng = np.random.Generator(np.random.Philox(seed))
        coefficients = rng.standard_normal(k)
        if clamp is not None:
            coefficients = np.clip(coefficients, -clamp, clamp)
    return srvft_to_tree(model_to_srvft(model, coefficients))


# ---------------------------------------------------------------------------
# reflection symmetry


def reflect(t: Tree, plane_normal=(1.0, 0.0, 0.0)) -> Tree:
    """Mirror the tree through the plane with the given normal passing
    through the start of its main branch; radii are unchanged."""
    v = np.asarray(plane_normal, dtype=float)
    nv2 = float(v @ v)
    if nv2 < 1e-30:
        raise DomainError("plane normal must be nonzero")
    H = np.eye(3) - 2.0 * np.outer(v, v) / nv2
    p0 = t.main.points[0]

    def rec(node: Tree) -> Tree:
        pts = p0 + (node.main.points - p0) @ H.T
        children = [AttachedSubtree(c.s, rec(c.tree)) for c in node.children]
        return Tree(Branch(pts, node.main.radii), children)

    return rec(t)


def symmetrize(
    t: Tree,
    plane_normal=(1.0, 0.0, 0.0),
    w: MetricWeights | None = None,
    options: AlignOptions | None = None,
) -> tuple[float, Tree]:
    """Asymmetry score and nearest symmetric tree.

    The score is the geodesic length between the tree and its reflection;
    the midpoint of that geodesic is the symmetrized tree.
    """
    mirrored = reflect(t, plane_normal)
    g = geodesic(t, mirrored, w, options)
    return g.length, eval_geodesic(g, 0.5)
