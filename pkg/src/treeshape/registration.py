"""Joint registration of two tree transforms: one global rotation, per-branch
reparameterizations, and per-level subtree permutations, found by coordinate
descent (dynamic programming for warps, linear assignment for permutations,
weighted Procrustes for the rotation).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, GridMismatch, StructureMismatch
from .srvf import (
    SRVFT,
    MetricWeights,
    QBranch,
    SrvftChild,
    check_warp,
    qdist,
    reparam_q,
    rotate_srvft,
)
from .metric import adopt_null_positions, tree_distance, tree_sq_norm

#: Local slopes explored by the warping dynamic program.
DP_STENCIL = ((1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2))


@dataclass(frozen=True)
class Warp:
    """Monotone reparameterization sampled on the branch node grid:
    ``values[0] == 0``, ``values[-1] == 1``, nondecreasing."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", check_warp(self.values))

    @property
    def is_identity(self) -> bool:
        n = self.values.size
        return bool(np.allclose(self.values, np.linspace(0.0, 1.0, n), atol=1e-12))


def identity_warp(n_nodes: int) -> Warp:
    return Warp(np.linspace(0.0, 1.0, n_nodes))


@dataclass(frozen=True)
class WarpBundle:
    """Warps for a subtree: the main branch's warp plus one bundle per child
    slot (in the reference tree's slot order)."""

    warp: Warp
    children: list["WarpBundle"] = field(default_factory=list)


@dataclass(frozen=True)
class Permutation:
    """Recursive slot mapping: ``sigma[i]`` is the second tree's child slot
    matched to the reference tree's slot i; bijective after padding."""

    sigma: np.ndarray
    children: list["Permutation"] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=int))


@dataclass(frozen=True)
class Alignment:
    """Result of registering the second tree onto the first: the rotation,
    the recursive warp and permutation bundles, the final distance, and the
    distance recorded after each accepted descent iteration."""

    rotation: np.ndarray
    warps: WarpBundle
    permutation: Permutation
    distance: float
    history: list[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# dynamic-programming reparameterization


def _dp_tables(q1: np.ndarray, q2: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """Edge-cost tables, one per stencil slope.

    ``table[(a, b)][i, j]`` is the cost of the lattice edge ending at node
    (i, j) with slope b/a: the squared mismatch between q1 over the covered
    intervals and q2 carried through the linear warp, integrated with the
    interval rule.
    """
    m = q1.shape[0]
    h = 1.0 / m
    idx = np.arange(m)
    tables = {}
    for a, b in DP_STENCIL:
        if a > m or b > m:
            continue
        slope = b / a
        sq = np.sqrt(slope)
        table = np.zeros((m + 1, m + 1))
        rows = np.arange(a, m + 1)
        cols = np.arange(b, m + 1)
        block = np.zeros((rows.size, cols.size))
        for k in range(a):
            r1 = q1[rows - a + k]
            # interval k of the edge maps to q2 around this staggered position
            u = np.clip((cols - b) + (k + 0.5) * slope - 0.5, 0.0, m - 1.0)
            lo = np.minimum(u.astype(int), m - 2) if m > 1 else np.zeros_like(u, int)
            frac = (u - lo)[:, None]
            r2 = q2[lo] * (1.0 - frac) + q2[lo + 1] * frac
            block += (
                np.sum(r1**2, axis=1)[:, None]
                + slope * np.sum(r2**2, axis=1)[None, :]
                - 2.0 * sq * (r1 @ r2.T)
            )
        table[a:, b:] = block * h
        tables[(a, b)] = table
    return tables


def _dp_solve(q1: np.ndarray, q2: np.ndarray) -> tuple[np.ndarray, float]:
    """Shortest monotone lattice path from (0,0) to (m,m).

    Returns the warp sampled on the node grid and the path cost.
    """
    m = q1.shape[0]
    tables = _dp_tables(q1, q2)
    dist = np.full((m + 1, m + 1), np.inf)
    dist[0, 0] = 0.0
    choice = np.full((m + 1, m + 1), -1, dtype=int)
    for i in range(1, m + 1):
        for si, (a, b) in enumerate(DP_STENCIL):
            if (a, b) not in tables or i < a:
                continue
            js = np.arange(b, m + 1)
            cand = dist[i - a, js - b] + tables[(a, b)][i, js]
            take = cand < dist[i, js]
            if np.any(take):
                dist[i, js[take]] = cand[take]
                choice[i, js[take]] = si
    i, j = m, m
    nodes = [(i, j)]
    while (i, j) != (0, 0):
        a, b = DP_STENCIL[choice[i, j]]
        i, j = i - a, j - b
        nodes.append((i, j))
    nodes.reverse()
    ii = np.array([n[0] for n in nodes], dtype=float)
    jj = np.array([n[1] for n in nodes], dtype=float)
    gamma = np.interp(np.arange(m + 1), ii, jj) / m
    return gamma, float(dist[m, m])


def dp_reparam(q1: QBranch, q2: QBranch) -> Warp:
    """Optimal reparameterization carrying ``q2`` onto ``q1``.

    Solves the warp minimization by dynamic programming on the node lattice
    with the :data:`DP_STENCIL` slopes. Returns the identity when either
    input is null, or when the realized distance would not improve on it.
    """
    if q1.m != q2.m:
        raise GridMismatch(f"grids differ: {q1.m} vs {q2.m}")
    if q1.is_null or q2.is_null:
        return identity_warp(q1.m + 1)
    gamma, _ = _dp_solve(q1.q, q2.q)
    warp = Warp(gamma)
    if qdist(q1, reparam_q(q2, warp)) > qdist(q1, q2) + 1e-12:
        return identity_warp(q1.m + 1)
    return warp


# ---------------------------------------------------------------------------
# rotation and assignment


def procrustes_rotation(Q1: SRVFT, Q2: SRVFT, w: MetricWeights) -> np.ndarray:
    """Best global rotation of ``Q2`` onto ``Q1`` for fixed warps/permutation.

    ``Q2`` must already be carried onto ``Q1``'s slot structure. Each matched
    branch pair contributes its spatial samples weighted by the metric
    coefficient accumulated along its recursion path; the orthogonal
    Procrustes problem is solved by SVD with a determinant correction so the
    result stays a proper rotation. An all-zero stack yields the identity.
    """
    from .srvf import map_structure

    cross = np.zeros((3, 3))
    for a, b, depth in map_structure(Q1, Q2):
        coeff = w.lambda_m * w.lambda_s**depth
        if coeff == 0.0:
            continue
        cross += coeff * (b.q0.q[:, :3].T @ a.q0.q[:, :3])
    if np.abs(cross).max() < 1e-15:
        return np.eye(3)
    U, _, Vh = np.linalg.svd(cross)
    d = np.sign(np.linalg.det(Vh.T @ U.T))
    return Vh.T @ np.diag([1.0, 1.0, d]) @ U.T


def assignment(E: np.ndarray) -> np.ndarray:
    """Minimum-cost bijection of rows onto columns of a square cost matrix.

    Among all optimal assignments, returns the lexicographically smallest
    mapping (row 0 gets the smallest feasible column first, and so on).
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise DomainError(f"cost matrix must be square, got {E.shape}")
    if not np.all(np.isfinite(E)):
        raise DomainError("cost matrix entries must be finite")
    n = E.shape[0]
    if n == 0:
        return np.empty(0, dtype=int)
    rows, cols = linear_sum_assignment(E)
    total = float(E[rows, cols].sum())
    tol = 1e-9 * (1.0 + abs(total))

    sigma = np.empty(n, dtype=int)
    remaining = list(range(n))
    acc = 0.0
    for i in range(n):
        chosen = -1
        for j in remaining:
            rest_cols = [c for c in remaining if c != j]
            if i + 1 < n:
                sub = E[np.ix_(np.arange(i + 1, n), rest_cols)]
                rr, cc = linear_sum_assignment(sub)
                rest = float(sub[rr, cc].sum())
            else:
                rest = 0.0
            if acc + E[i, j] + rest <= total + tol:
                chosen = j
                break
        if chosen < 0:  # numerical fallback: keep the solver's column
            chosen = int(cols[np.where(rows == i)[0][0]])
            if chosen not in remaining:
                chosen = remaining[0]
        sigma[i] = chosen
        acc += E[i, chosen]
        remaining.remove(chosen)
    return sigma


# ---------------------------------------------------------------------------
# recursive matching


def _warp_inverse(values: np.ndarray, s: float) -> float:
    u = np.linspace(0.0, 1.0, values.size)
    return float(np.interp(s, values, u))


def _shift_children(Q: SRVFT, warp: Warp) -> SRVFT:
    """Recompute child attachment parameters after warping the main branch."""
    children = [
        SrvftChild(_warp_inverse(warp.values, c.s), c.subtree) for c in Q.children
    ]
    return SRVFT(Q.q0, children, Q.origin)


def pair_cost(
    i: int,
    j: int,
    Q1: SRVFT,
    Q2: SRVFT,
    w: MetricWeights,
    n_levels: int = 2,
):
    """Cost of matching child slot ``i`` of ``Q1`` with slot ``j`` of ``Q2``
    (``Q2`` already rotated), plus the sub-alignment that realized it.

    A real subtree against a null slot costs its own weighted squared norm;
    the null adopts the real attachment parameter, so no position cost is
    paid. Deep subtree pairs are estimated by a one-iteration recursive
    alignment; leaf pairs by a single dynamic-programming warp.
    """
    c1, c2 = Q1.children[i], Q2.children[j]
    a, b = c1.subtree, c2.subtree
    if a.is_null and b.is_null:
        return 0.0, None
    if a.is_null or b.is_null:
        real = b if a.is_null else a
        return w.lambda_s * tree_sq_norm(real, w), None
    if n_levels >= 3 and (a.children or b.children):
        sub = align_trees(a, b, w, n_levels=n_levels - 1, n_max=1)
        d2 = sub.distance**2
    else:
        warp = dp_reparam(a.q0, b.q0)
        d2 = w.lambda_m * qdist(a.q0, reparam_q(b.q0, warp)) ** 2
        sub = warp
    return w.lambda_s * d2 + w.lambda_p * (c1.s - c2.s) ** 2, sub


def reparam_permute(
    O: np.ndarray,
    Q1: SRVFT,
    Q2: SRVFT,
    w: MetricWeights,
    n_levels: int = 2,
) -> tuple[WarpBundle, Permutation]:
    """One sweep of the warp + permutation half of the descent, for a fixed
    rotation: warp the main branches, fill the child cost matrix, solve the
    assignment, and recurse into every matched pair.
    """
    Q2r = rotate_srvft(Q2, O)
    return _reparam_permute(Q1, Q2r, w, n_levels)


def _reparam_permute(Q1, Q2, w, n_levels):
    if len(Q1.children) != len(Q2.children):
        raise StructureMismatch(
            f"padded trees required: {len(Q1.children)} vs {len(Q2.children)} children"
        )
    gamma0 = dp_reparam(Q1.q0, Q2.q0)
    Q2s = _shift_children(Q2, gamma0)
    n = len(Q1.children)
    if n == 0:
        return WarpBundle(gamma0, []), Permutation(np.empty(0, dtype=int), [])

    E = np.zeros((n, n))
    cache = {}
    for i in range(n):
        for j in range(n):
            E[i, j], cache[i, j] = pair_cost(i, j, Q1, Q2s, w, n_levels)
    sigma = assignment(E)

    wkids, pkids = [], []
    for i in range(n):
        a = Q1.children[i].subtree
        b = Q2s.children[int(sigma[i])].subtree
        if a.children or b.children:
            wb, pb = _reparam_permute(a, b, w, max(2, n_levels - 1))
        else:
            sub = cache[i, int(sigma[i])]
            warp = sub if isinstance(sub, Warp) else identity_warp(a.grid + 1)
            wb, pb = WarpBundle(warp, []), Permutation(np.empty(0, dtype=int), [])
        wkids.append(wb)
        pkids.append(pb)
    return WarpBundle(gamma0, wkids), Permutation(sigma, pkids)


def apply_warp_perm(Q1: SRVFT, Q2: SRVFT, warps: WarpBundle, perm: Permutation) -> SRVFT:
    """Carry ``Q2`` onto ``Q1``'s slot structure with the given bundles
    (no rotation): warp each branch, reorder children by the permutation,
    shift attachment parameters through the main warp, and let matched null
    branches adopt their partner's position.
    """

    def rec(n1: SRVFT, n2: SRVFT, wb: WarpBundle, pb: Permutation) -> SRVFT:
        q = n2.q0 if n2.q0.is_null else reparam_q(n2.q0, wb.warp)
        children = []
        for i in range(len(n1.children)):
            j = int(pb.sigma[i])
            c1, c2 = n1.children[i], n2.children[j]
            sub = rec(c1.subtree, c2.subtree, wb.children[i], pb.children[i])
            s = _warp_inverse(wb.warp.values, c2.s)
            if c2.subtree.is_null:
                s = c1.s
            children.append(SrvftChild(s, sub))
        return SRVFT(q, children, n2.origin)

    return rec(Q1, Q2, warps, perm)


def apply_alignment(Q1: SRVFT, Q2: SRVFT, alignment: Alignment) -> SRVFT:
    """Fully transformed ``Q2``: rotated, warped, and permuted onto ``Q1``."""
    return rotate_srvft(
        apply_warp_perm(Q1, Q2, alignment.warps, alignment.permutation),
        alignment.rotation,
    )


def _evaluate(Q1, Q2, O, wb, pb, w) -> float:
    moved = rotate_srvft(apply_warp_perm(Q1, Q2, wb, pb), O)
    a, b = adopt_null_positions(Q1, moved)
    return tree_distance(a, b, w)


def identity_alignment(Q: SRVFT) -> Alignment:
    def wrec(node: SRVFT) -> WarpBundle:
        return WarpBundle(
            identity_warp(node.grid + 1), [wrec(c.subtree) for c in node.children]
        )

    def prec(node: SRVFT) -> Permutation:
        return Permutation(
            np.arange(len(node.children)), [prec(c.subtree) for c in node.children]
        )

    return Alignment(np.eye(3), wrec(Q), prec(Q), 0.0, [0.0])


def align_trees(
    Q1: SRVFT,
    Q2: SRVFT,
    w: MetricWeights | None = None,
    n_levels: int | None = None,
    n_max: int = 5,
    tol: float = 1e-8,
    initial_rotation: np.ndarray | None = None,
) -> Alignment:
    """Register ``Q2`` onto ``Q1`` by alternating warp/permutation sweeps with
    Procrustes rotation updates.

    The trees must already be padded to a common structure. Candidate steps
    that would increase the evaluated distance are rejected, so the recorded
    ``history`` is nonincreasing; iteration stops after ``n_max`` rounds or
    when the relative improvement drops below ``tol``.
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    w = w or MetricWeights()
    if n_levels is None:
        n_levels = max(Q1.depth, Q2.depth)
    n_levels = int(np.clip(n_levels, 2, 4))

    O = np.eye(3) if initial_rotation is None else np.asarray(initial_rotation, float)
    wb, pb = reparam_permute(O, Q1, Q2, w, n_levels)
    best = (O, wb, pb, _evaluate(Q1, Q2, O, wb, pb, w))
    history = [best[3]]

    for _ in range(n_max):
        O_new = procrustes_rotation(Q1, apply_warp_perm(Q1, Q2, best[1], best[2]), w)
        cands = [(O_new, best[1], best[2])]
        wb2, pb2 = reparam_permute(O_new, Q1, Q2, w, n_levels)
        cands.append((O_new, wb2, pb2))
        scored = [(c, _evaluate(Q1, Q2, *c, w)) for c in cands]
        (O_c, wb_c, pb_c), d_c = min(scored, key=lambda t: t[1])
        if d_c > best[3] + 1e-12:
            break
        improved = best[3] - d_c
        best = (O_c, wb_c, pb_c, d_c)
        history.append(d_c)
        if improved < tol * max(history[0], 1e-30):
            break
    return Alignment(best[0], best[1], best[2], best[3], history)


def null_match_count(Q1: SRVFT, Q2: SRVFT, alignment: Alignment) -> int:
    """Number of matched branch pairs where exactly one side is null, over
    the whole hierarchy (births plus deaths along the geodesic)."""

    def rec(n1: SRVFT, n2: SRVFT, pb: Permutation) -> int:
        count = 0
        for i in range(len(n1.children)):
            j = int(pb.sigma[i])
            a, b = n1.children[i].subtree, n2.children[j].subtree
            if a.q0.is_null != b.q0.is_null:
                count += 1
            count += rec(a, b, pb.children[i])
        return count

    total = rec(Q1, Q2, alignment.permutation)
    if Q1.q0.is_null != Q2.q0.is_null:
        total += 1
    return total
