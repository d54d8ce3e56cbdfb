"""File formats: tree documents (JSON), SWC skeletons, correspondence maps,
geodesic frame sequences, and serialized shape models.

JSON floats are written with Python's shortest round-trip representation, so
a write/read cycle reproduces every numeric field bit-exactly.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ParseError, SchemaError, UnsupportedVersion
from .metric import Geodesic, point_on_geodesic
from .model import CurveSoup, Tree, flatten_depth, select_main_branch
from .registration import Alignment, Permutation
from .srvf import SRVFT, MetricWeights, QBranch, SrvftChild, srvft_to_tree
from .statistics import CoordinateLayout, ShapeModel

TREE_FORMAT_VERSION = "1"
MODEL_FORMAT_VERSION = "1"


# ---------------------------------------------------------------------------
# tree documents


def tree_to_document(tree: Tree, units: str = "unitless") -> dict:
    def rec(t: Tree) -> dict:
        return {
            "main": {
                "points": t.main.points.tolist(),
                "radii": t.main.radii.tolist(),
            },
            "children": [{"s": float(c.s), "tree": rec(c.tree)} for c in t.children],
        }

    return {"version": TREE_FORMAT_VERSION, "units": units, "tree": rec(tree)}


def document_to_tree(doc: dict) -> Tree:
    if not isinstance(doc, dict):
        raise SchemaError("document must be a JSON object")
    version = doc.get("version")
    if version is None:
        raise SchemaError("missing 'version' field")
    if version != TREE_FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported tree format version {version!r}")
    if "tree" not in doc:
        raise SchemaError("missing 'tree' field")

    from .model import AttachedSubtree, Branch
    from .errors import DomainError

    def rec(node) -> Tree:
        if not isinstance(node, dict) or "main" not in node:
            raise SchemaError("tree node must be an object with a 'main' branch")
        main = node["main"]
        try:
            branch = Branch(np.asarray(main["points"], float), np.asarray(main["radii"], float))
        except (KeyError, TypeError, ValueError, DomainError) as e:
            raise SchemaError(f"invalid branch: {e}") from e
        children = []
        for c in node.get("children", []):
            if not isinstance(c, dict) or "s" not in c or "tree" not in c:
                raise SchemaError("child entries need 's' and 'tree' fields")
            try:
                children.append(AttachedSubtree(float(c["s"]), rec(c["tree"])))
            except DomainError as e:
                raise SchemaError(str(e)) from e
        return Tree(branch, children)

    return flatten_depth(rec(doc["tree"]))


def write_tree(tree: Tree, path, units: str = "unitless") -> None:
    with open(path, "w") as f:
        json.dump(tree_to_document(tree, units), f, indent=1)
        f.write("\n")


def read_tree(path) -> Tree:
    """Load a tree from a ``.json`` document or a ``.swc`` skeleton."""
    if str(path).lower().endswith(".swc"):
        with open(path) as f:
            return parse_swc(f.read())
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"not valid JSON: {e}") from e
    return document_to_tree(doc)


# ---------------------------------------------------------------------------
# SWC skeletons


def parse_swc(text: str, mode: str = "neuronal") -> Tree:
    """Parse the 7-column SWC format: ``id type x y z radius parent``.

    Comment lines start with '#'. Unbranched runs merge into single
    branches; the main branch is chosen by ``mode`` (longest path for
    neuronal data). Malformed rows, duplicate ids, missing parents, and
    cycles raise :class:`ParseError` with the offending line number.
    """
    records: dict[int, tuple] = {}
    lines: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 7:
            raise ParseError(f"expected 7 fields, got {len(fields)}", lineno)
        try:
            rid = int(fields[0])
            xyz = tuple(float(v) for v in fields[2:5])
            radius = float(fields[5])
            parent = int(fields[6])
        except ValueError as e:
            raise ParseError(f"bad numeric field ({e})", lineno) from e
        if rid in records:
            raise ParseError(f"duplicate id {rid}", lineno)
        records[rid] = (xyz, radius, parent)
        lines[rid] = lineno
    if not records:
        raise ParseError("no records found", 1)

    roots = [rid for rid, (_, _, p) in records.items() if p == -1]
    if not roots:
        raise ParseError("no root record (parent -1)", 1)
    if len(roots) > 1:
        extra = sorted(roots)[1]
        raise ParseError(f"multiple roots; second root is id {extra}", lines[extra])
    for rid, (_, _, parent) in records.items():
        if parent != -1 and parent not in records:
            raise ParseError(f"record {rid} references missing parent {parent}", lines[rid])

    # a cycle exists when a parent chain never reaches the root
    state: dict[int, int] = {}
    for rid in records:
        chain = []
        cur = rid
        while cur != -1 and state.get(cur) is None:
            state[cur] = 0
            chain.append(cur)
            cur = records[cur][2]
        if cur != -1 and state[cur] == 0 and cur in chain:
            raise ParseError(f"cycle through id {cur}", lines[cur])
        for c in chain:
            state[c] = 1

    ids = sorted(records)
    index = {rid: k for k, rid in enumerate(ids)}
    points = np.array([records[rid][0] for rid in ids])
    radii = np.array([records[rid][1] for rid in ids])
    edges = [
        (index[rid], index[records[rid][2]])
        for rid in ids
        if records[rid][2] != -1
    ]
    soup = CurveSoup(points, radii, edges, index[roots[0]])
    return flatten_depth(select_main_branch(soup, mode=mode))


# ---------------------------------------------------------------------------
# correspondence maps


def correspondence_map(Q1: SRVFT, Q2: SRVFT, alignment: Alignment) -> dict:
    """Branch-level matches as child-index paths into the two prepared
    (normalized, padded) trees; a null partner is recorded as None."""
    pairs = []

    def add(path1, path2, real1, real2):
        if real1 or real2:
            pairs.append(
                {
                    "tree1": list(path1) if real1 else None,
                    "tree2": list(path2) if real2 else None,
                    "color": len(pairs),
                }
            )

    def rec(a: SRVFT, b: SRVFT, perm: Permutation, path1, path2):
        add(path1, path2, not a.q0.is_null, not b.q0.is_null)
        for i in range(len(a.children)):
            j = int(perm.sigma[i])
            rec(
                a.children[i].subtree,
                b.children[j].subtree,
                perm.children[i],
                path1 + (i,),
                path2 + (j,),
            )

    rec(Q1, Q2, alignment.permutation, (), ())
    return {"version": TREE_FORMAT_VERSION, "pairs": pairs}


def write_correspondence(mapping: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(mapping, f, indent=1)
        f.write("\n")


# ---------------------------------------------------------------------------
# geodesic frames


def write_geodesic_frames(g: Geodesic, frames: int, outdir) -> list[str]:
    """Write ``frames`` evenly spaced geodesic snapshots plus an index file
    listing the t values; returns the frame file names."""
    os.makedirs(outdir, exist_ok=True)
    ts = np.linspace(0.0, 1.0, frames)
    names = []
    for k, t in enumerate(ts):
        tree = srvft_to_tree(point_on_geodesic(g, float(t)))
        name = f"frame_{k:03d}.json"
        write_tree(tree, os.path.join(outdir, name))
        names.append(name)
    index = {
        "version": TREE_FORMAT_VERSION,
        "length": g.length,
        "t": [float(t) for t in ts],
        "frames": names,
    }
    with open(os.path.join(outdir, "index.json"), "w") as f:
        json.dump(index, f, indent=1)
        f.write("\n")
    return names


# ---------------------------------------------------------------------------
# shape models


def _srvft_to_doc(Q: SRVFT) -> dict:
    return {
        "q": Q.q0.q.tolist(),
        "c": float(Q.q0.c),
        "r0": float(Q.q0.r0),
        "origin": Q.origin.tolist(),
        "children": [{"s": float(c.s), "tree": _srvft_to_doc(c.subtree)} for c in Q.children],
    }


def _doc_to_srvft(doc: dict) -> SRVFT:
    try:
        q = QBranch(np.asarray(doc["q"], float), float(doc["c"]), float(doc["r0"]))
        children = [
            SrvftChild(float(c["s"]), _doc_to_srvft(c["tree"]))
            for c in doc["children"]
        ]
        return SRVFT(q, children, np.asarray(doc["origin"], float))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"invalid transform record: {e}") from e


def shape_model_to_document(model: ShapeModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "sample_count": model.sample_count,
        "metric_weights": {
            "lambda_m": model.weights.lambda_m,
            "lambda_s": model.weights.lambda_s,
            "lambda_p": model.weights.lambda_p,
        },
        "eigenvalues": model.eigenvalues.tolist(),
        "eigenvectors": model.eigenvectors.tolist(),
        "layout_weights": model.layout.weights.tolist(),
        "mean": _srvft_to_doc(model.mean),
    }


def document_to_shape_model(doc: dict) -> ShapeModel:
    if not isinstance(doc, dict) or "version" not in doc:
        raise SchemaError("model document must be an object with a 'version'")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported model version {doc['version']!r}")
    try:
        wdoc = doc["metric_weights"]
        return ShapeModel(
            mean=_doc_to_srvft(doc["mean"]),
            eigenvalues=np.asarray(doc["eigenvalues"], float),
            eigenvectors=np.asarray(doc["eigenvectors"], float),
            sample_count=int(doc["sample_count"]),
            layout=CoordinateLayout(np.asarray(doc["layout_weights"], float)),
            weights=MetricWeights(wdoc["lambda_m"], wdoc["lambda_s"], wdoc["lambda_p"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"invalid model document: {e}") from e


def write_shape_model(model: ShapeModel, path) -> None:
    with open(path, "w") as f:
        json.dump(shape_model_to_document(model), f, indent=1)
        f.write("\n")


def read_shape_model(path) -> ShapeModel:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"not valid JSON: {e}") from e
    return document_to_shape_model(doc)
