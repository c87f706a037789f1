"""4D-aware object placement and occlusion-correct mask-sequence generation.

Given per-frame scene geometry (depth maps, camera poses, optical flow)
and a first-frame object placement, this package propagates the object
through time via lifted scene flow and renders a temporally consistent,
occlusion-tested binary mask sequence.  It also ships the
similarity-ranked reference-image selection used for dataset
construction, a synthetic-scene generator with exact ground truth, and an
HTTP session service plus CLI around the whole workflow.
"""

from .bundle import SceneBundle, ScenePointSet, load_bundle, save_bundle
from .formats import (
    ObjectCloud,
    parse_flo,
    parse_pfm,
    parse_ply,
    write_flo,
    write_pfm,
    write_ply,
)
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    RigidPlacement,
    apply_placement,
    project,
    unproject,
)
from .propagation import (
    PlacementTrajectory,
    PropagationConfig,
    propagate_step,
    propagate_trajectory,
)
from .render import (
    MaskSequence,
    RenderConfig,
    extract_mask,
    occlusion_test,
    render_sequence,
    splat_object,
)
from .synthetic import SyntheticSceneSpec, make_ball_cloud, synthesize_scene

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "CameraPose",
    "MaskSequence",
    "ObjectCloud",
    "PlacementTrajectory",
    "PropagationConfig",
    "RenderConfig",
    "RigidPlacement",
    "SceneBundle",
    "ScenePointSet",
    "SyntheticSceneSpec",
    "apply_placement",
    "extract_mask",
    "load_bundle",
    "make_ball_cloud",
    "occlusion_test",
    "parse_flo",
    "parse_pfm",
    "parse_ply",
    "project",
    "propagate_step",
    "propagate_trajectory",
    "render_sequence",
    "save_bundle",
    "splat_object",
    "synthesize_scene",
    "unproject",
    "write_flo",
    "write_pfm",
    "write_ply",
    "__version__",
]
