"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io
from .errors import TreeShapeError
from .metric import AlignOptions, geodesic, invariant_distance, register
from .registration import null_match_count
from .srvf import MetricWeights, srvft_to_tree, tree_to_srvft
from .statistics import fit_pca, karcher_mean, symmetrize, synthesize

_PRESETS = {
    "botanical": MetricWeights.botanical,
    "neuron": MetricWeights.neuronal,
}


def _add_shared(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("metric and pipeline options")
    g.add_argument("--preset", choices=sorted(_PRESETS), help="weight preset")
    g.add_argument("--lambda-m", type=float, default=None, help="main-branch weight")
    g.add_argument("--lambda-s", type=float, default=None, help="subtree weight")
    g.add_argument("--lambda-p", type=float, default=None, help="sliding weight")
    g.add_argument("--samples-per-branch", type=int, default=100, metavar="N")
    g.add_argument("--iterations", type=int, default=5, metavar="N_MAX")
    g.add_argument("--restarts", type=int, default=1, metavar="R")
    g.add_argument("--no-scale-normalize", action="store_true")
    g.add_argument("--thickness-weight", type=float, default=1.0, metavar="C")
    g.add_argument("--seed", type=int, default=0)


def _weights(args) -> MetricWeights:
    base = _PRESETS[args.preset]() if args.preset else MetricWeights.botanical()
    return MetricWeights(
        base.lambda_m if args.lambda_m is None else args.lambda_m,
        base.lambda_s if args.lambda_s is None else args.lambda_s,
        base.lambda_p if args.lambda_p is None else args.lambda_p,
    )


def _options(args) -> AlignOptions:
    return AlignOptions(
        samples_per_branch=args.samples_per_branch,
        iterations=args.iterations,
        restarts=args.restarts,
        scale_normalize=not args.no_scale_normalize,
        thickness_weight=args.thickness_weight,
        seed=args.seed,
    )


def _cmd_distance(args) -> int:
    d, alignment = invariant_distance(
        io.read_tree(args.tree1), io.read_tree(args.tree2), _weights(args), _options(args)
    )
    print(f"{d:.6f}")
    if args.out:
        summary = {
            "distance": d,
            "history": alignment.history,
            "rotation": alignment.rotation.tolist(),
        }
        with open(args.out, "w") as f:
            json.dump(summary, f, indent=1)
            f.write("\n")
    return 0


def _cmd_match(args) -> int:
    Q1, Q2, alignment, d = register(
        io.read_tree(args.tree1), io.read_tree(args.tree2), _weights(args), _options(args)
    )
    mapping = io.correspondence_map(Q1, Q2, alignment)
    io.write_correspondence(mapping, args.out)
    print(
        f"distance {d:.6f}  pairs {len(mapping['pairs'])}  "
        f"null-matched {null_match_count(Q1, Q2, alignment)}"
    )
    return 0


def _cmd_geodesic(args) -> int:
    g = geodesic(
        io.read_tree(args.tree1), io.read_tree(args.tree2), _weights(args), _options(args)
    )
    io.write_geodesic_frames(g, args.frames, args.out)
    print(f"length {g.length:.6f}  frames {args.frames}  -> {args.out}")
    return 0


def _cmd_mean(args) -> int:
    trees = [io.read_tree(p) for p in args.trees]
    mean, _ = karcher_mean(trees, _weights(args), options=_options(args))
    io.write_tree(srvft_to_tree(mean), args.out)
    print(f"mean of {len(trees)} trees -> {args.out}")
    return 0


def _cmd_pca(args) -> int:
    trees = [io.read_tree(p) for p in args.trees]
    model = fit_pca(trees, _weights(args), options=_options(args))
    io.write_shape_model(model, args.out)
    ratios = model.cumulative_ratios()
    print("k  eigenvalue    cumulative")
    for k, (lam, r) in enumerate(zip(model.eigenvalues, ratios), 1):
        print(f"{k:<2} {lam:<12.6g} {r:.2f}")
    return 0


def _cmd_sample(args) -> int:
    model = io.read_shape_model(args.model)
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        tree = synthesize(model, seed=args.seed + i, clamp=args.clamp)
        io.write_tree(tree, os.path.join(args.out, f"sample_{i:03d}.json"))
    print(f"wrote {args.count} samples -> {args.out}")
    return 0


_PLANES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def _cmd_symmetrize(args) -> int:
    if args.plane in _PLANES:
        normal = _PLANES[args.plane]
    else:
        try:
            normal = tuple(float(v) for v in args.plane.split(","))
        except ValueError:
            raise TreeShapeError(f"bad plane spec {args.plane!r}; use x|y|z or nx,ny,nz")
        if len(normal) != 3:
            raise TreeShapeError("plane normal needs 3 components")
    score, tree = symmetrize(
        io.read_tree(args.tree), normal, _weights(args), _options(args)
    )
    print(f"asymmetry {score:.6f}")
    if args.out:
        io.write_tree(tree, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeshape",
        description="Elastic shape analysis of tree-like 3D objects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="invariant distance between two trees")
    p.add_argument("tree1")
    p.add_argument("tree2")
    p.add_argument("--out", help="write an alignment summary JSON")
    _add_shared(p)
    p.set_defaults(func=_cmd_distance)

    p = sub.add_parser("match", help="export branch correspondences")
    p.add_argument("tree1")
    p.add_argument("tree2")
    p.add_argument("--out", required=True, help="correspondence map JSON")
    _add_shared(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("geodesic", help="write frames of the deformation path")
    p.add_argument("tree1")
    p.add_argument("tree2")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--out", required=True, help="output directory")
    _add_shared(p)
    p.set_defaults(func=_cmd_geodesic)

    p = sub.add_parser("mean", help="mean shape of a collection")
    p.add_argument("trees", nargs="+")
    p.add_argument("--out", required=True)
    _add_shared(p)
    p.set_defaults(func=_cmd_mean)

    p = sub.add_parser("pca", help="fit a statistical shape model")
    p.add_argument("trees", nargs="+")
    p.add_argument("--out", required=True, help="model JSON")
    _add_shared(p)
    p.set_defaults(func=_cmd_pca)

    p = sub.add_parser("sample", help="synthesize trees from a fitted model")
    p.add_argument("model")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--clamp", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output directory")
    _add_shared(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("symmetrize", help="asymmetry score and symmetrized tree")
    p.add_argument("tree")
    p.add_argument("--plane", default="x", help="x|y|z or nx,ny,nz")
    p.add_argument("--out", help="write the symmetrized tree")
    _add_shared(p)
    p.set_defaults(func=_cmd_symmetrize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TreeShapeError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
