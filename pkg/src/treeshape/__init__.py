"""Elastic shape analysis of tree-like 3D objects.

Trees are recursive structures of skeletal curves with thickness. The
package provides an invariant metric between them (quotienting rotation,
branch reparameterization, and subtree order), joint correspondence and
geodesic computation, and statistics: means, principal modes, random
synthesis, and symmetrization.
"""

from .errors import (
    CyclicSkeleton,
    DegenerateBranch,
    DegenerateTree,
    DisconnectedSkeleton,
    DomainError,
    EmptyCollection,
    GridMismatch,
    InvalidRotation,
    InvalidWarp,
    ParseError,
    SchemaError,
    StructureMismatch,
    TreeShapeError,
    UnsupportedVersion,
)
from .model import (
    AttachedSubtree,
    Branch,
    CurveSoup,
    Tree,
    flatten_depth,
    is_null_tree,
    normalize,
    null_branch,
    null_tree,
    pad_null_branches,
    pad_to_counts,
    point_at,
    resample_branch,
    resample_tree,
    select_main_branch,
    tree_order,
)
from .srvf import (
    SRVFT,
    MetricWeights,
    QBranch,
    SrvftChild,
    esrvf,
    inverse_esrvf,
    qdist,
    qnorm,
    reparam_q,
    rotate_q,
    rotate_srvft,
    srvft_to_tree,
    tree_to_srvft,
)
from .metric import (
    AlignOptions,
    Geodesic,
    adopt_null_positions,
    eval_geodesic,
    geodesic,
    invariant_distance,
    point_on_geodesic,
    prepare_pair,
    register,
    tree_distance,
    tree_norm,
    tree_sq_norm,
)
from .registration import (
    Alignment,
    Permutation,
    Warp,
    WarpBundle,
    align_trees,
    apply_alignment,
    apply_warp_perm,
    assignment,
    dp_reparam,
    identity_alignment,
    identity_warp,
    null_match_count,
    pair_cost,
    procrustes_rotation,
    reparam_permute,
)
from .statistics import (
    CoordinateLayout,
    ShapeModel,
    fit_pca,
    karcher_mean,
    model_to_srvft,
    project,
    reflect,
    symmetrize,
    synthesize,
)
from .io import (
    correspondence_map,
    document_to_shape_model,
    document_to_tree,
    parse_swc,
    read_shape_model,
    read_tree,
    shape_model_to_document,
    tree_to_document,
    write_correspondence,
    write_geodesic_frames,
    write_shape_model,
    write_tree,
)

__version__ = "0.1.0"
