"""Generators for synthetic test and demo trees.

Everything is driven by an explicit numpy Generator so fixtures are
reproducible.
"""

from __future__ import annotations

import numpy as np

from .model import AttachedSubtree, Branch, Tree, point_at, resample_branch


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _frame(direction):
    """Two unit vectors orthogonal to ``direction``."""
    d = _unit(direction)
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = _unit(np.cross(d, helper))
    v = np.cross(d, u)
    return u, v


def smooth_branch(
    rng: np.random.Generator,
    n: int = 100,
    start=(0.0, 0.0, 0.0),
    direction=(0.0, 0.0, 1.0),
    length: float = 1.0,
    wiggle: float = 0.1,
    radius: float = 0.05,
    modes: int = 3,
) -> Branch:
    """Smooth curve: a straight run plus a few low-order sinusoidal
    transverse modes, with gently tapering thickness."""
    dense = max(4 * n, 256)
    s = np.linspace(0.0, 1.0, dense)
    d = _unit(direction)
    u, v = _frame(d)
    pts = np.asarray(start, float) + np.outer(s * length, d)
    for k in range(1, modes + 1):
        amp_u, amp_v = rng.uniform(-wiggle, wiggle, 2) * length / k**2
        pts += np.outer(np.sin(np.pi * k * s), amp_u * u + amp_v * v)
    taper = rng.uniform(0.3, 0.7)
    radii = radius * (1.0 + 0.1 * np.sin(2 * np.pi * s)) * (1.0 - taper * s)
    return resample_branch(Branch(pts, np.maximum(radii, 1e-4)), n)


def random_tree(
    rng: np.random.Generator,
    depth: int = 2,
    children=(1, 3),
    n: int = 64,
    length: float = 1.0,
    radius: float = 0.06,
    wiggle: float = 0.1,
) -> Tree:
    """Random tree with the given number of levels; child counts per branch
    are drawn uniformly from ``children`` (inclusive range)."""

    def grow(start, direction, size, rad, level) -> Tree:
        main = smooth_branch(
            rng, n, start, direction, size, wiggle=wiggle, radius=rad
        )
        subtrees = []
        if level < depth:
            count = int(rng.integers(children[0], children[1] + 1))
            ss = np.sort(rng.uniform(0.15, 0.95, count))
            for s in ss:
                anchor = point_at(main, float(s))
                tilt = _unit(direction) + rng.uniform(-0.9, 0.9, 3)
                sub = grow(anchor, tilt, size * rng.uniform(0.35, 0.6), rad * 0.6, level + 1)
                subtrees.append(AttachedSubtree(float(s), sub))
        return Tree(main, subtrees)

    up = _unit(np.array([0.0, 0.0, 1.0]) + rng.uniform(-0.2, 0.2, 3))
    return grow(np.zeros(3), up, length, radius, 1)


def bent_curve(
    bend_at: float = 0.5,
    angle: float = 2.0,
    n: int = 100,
    length: float = 1.0,
    radius: float = 0.05,
) -> Branch:
    """Planar curve that runs straight, turns by ``angle`` radians over a
    short smooth elbow centered at arc fraction ``bend_at``, and continues."""
    dense = max(8 * n, 512)
    s = np.linspace(0.0, 1.0, dense)
    width = 0.1
    # heading as a smoothstep from 0 to `angle` around the elbow
    x = np.clip((s - (bend_at - width / 2)) / width, 0.0, 1.0)
    heading = angle * x * x * (3.0 - 2.0 * x)
    step = length / (dense - 1)
    dx = np.cos(heading) * step
    dy = np.sin(heading) * step
    pts = np.zeros((dense, 3))
    pts[1:, 0] = np.cumsum(dx[:-1])
    pts[1:, 1] = np.cumsum(dy[:-1])
    return resample_branch(Branch(pts, np.full(dense, radius)), n)


def helix_branch(
    n: int = 100, turns: float = 1.5, radius: float = 0.3, pitch: float = 1.0
) -> Branch:
    """Chiral curve: cannot be rotated onto its own mirror image."""
    dense = max(8 * n, 512)
    t = np.linspace(0.0, 2 * np.pi * turns, dense)
    pts = np.column_stack([radius * np.cos(t), radius * np.sin(t), pitch * t / (2 * np.pi)])
    return resample_branch(Branch(pts, np.full(dense, 0.05)), n)


def mirror_symmetric_tree(rng: np.random.Generator, n: int = 64) -> Tree:
    """Tree symmetric under reflection through the x = 0 plane: the trunk
    lies in the plane and every off-plane child has a mirrored twin."""
    trunk = smooth_branch(
        rng, n, direction=(0.0, 0.0, 1.0), wiggle=0.0, radius=0.05
    )
    children = []
    for s in (0.3, 0.7):
        anchor = point_at(trunk, s)
        side = smooth_branch(
            rng, n, anchor, direction=(0.8, 0.2, 0.6), length=0.5, wiggle=0.05, radius=0.03
        )
        mirror_pts = side.points * np.array([-1.0, 1.0, 1.0])
        children.append(AttachedSubtree(s, Tree(side, [])))
        children.append(AttachedSubtree(s, Tree(Branch(mirror_pts, side.radii), [])))
    return Tree(trunk, children)
