"""Scene-flow propagation of the first-frame placement through time.

Per step t→t+1: find the K scene points nearest the placed object's
centroid (the placement translation acts as the centroid anchor), project
them into frame t, lift the 2D flow at those pixels into 3D motion vectors
through the two depth maps, and shift the placement translation by the
arithmetic mean of the valid motions.  Rotation and scale are never
propagated.  Degenerate flow (too few valid lifts, or essentially static
2D flow) leaves the placement unchanged and flags the frame as a static
fallback.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .bundle import SceneBundle
from .errors import NoGeometryError, ValidationError
from .formats import FLOW_INVALID_THRESHOLD
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    RigidPlacement,
    project_points,
    unproject,
)

logger = logging.getLogger(__name__)

FLAG_INITIAL = "initial"
FLAG_PROPAGATED = "propagated"
FLAG_STATIC_FALLBACK = "static-fallback"


@dataclass(frozen=True)
class PropagationConfig:
    """Knobs for the flow-lifting step.

    Attributes:
        k_neighbors: how many nearest scene points to lift flow at.
        radius_cap: optional hard cap (meters) on the neighbor search;
            None means unbounded.
        min_valid_fraction: below this fraction of successfully lifted
            neighbors the step falls back to the previous placement.
        static_flow_threshold: mean 2D flow magnitude (pixels) under which
            the local scene is considered static.
    """

    k_neighbors: int = 32
    radius_cap: float | None = None
    min_valid_fraction: float = 0.5
    static_flow_threshold: float = 0.05

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be >= 1")
        if not (0.0 < self.min_valid_fraction <= 1.0):
            raise ValidationError("min_valid_fraction must be in (0, 1]")


@dataclass
class PlacementTrajectory:
    """Per-frame placements plus how each frame was produced."""

    placements: list[RigidPlacement]
    flags: list[str]

    def __post_init__(self):
        if len(self.placements) != len(self.flags):
            raise ValidationError("placements and flags lengths differ")

    def __len__(self) -> int:
        return len(self.placements)

    def __getitem__(self, t: int) -> RigidPlacement:
        return self.placements[t]

    def to_json_obj(self) -> list[dict]:
        return [
            {
                "scale": float(p.scale),
                "R": [float(x) for x in p.rotation.reshape(-1)],
                "t": [float(x) for x in p.translation],
                "flag": flag,
            }
            for p, flag in zip(self.placements, self.flags)
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)

    @staticmethod
    def from_json_obj(obj) -> "PlacementTrajectory":
        placements = [
            RigidPlacement(
                scale=float(e["scale"]),
                rotation=np.array(e["R"], dtype=np.float64).reshape(3, 3),
                translation=np.array(e["t"], dtype=np.float64),
            )
            for e in obj
        ]
        return PlacementTrajectory(placements, [e.get("flag", FLAG_PROPAGATED) for e in obj])

    @staticmethod
    def from_json(text: str) -> "PlacementTrajectory":
        return PlacementTrajectory.from_json_obj(json.loads(text))

    @staticmethod
    def constant(placement: RigidPlacement, frame_count: int) -> "PlacementTrajectory":
        """A static trajectory holding one placement for every frame."""
        return PlacementTrajectory(
            [placement] * frame_count,
            [FLAG_INITIAL] + [FLAG_STATIC_FALLBACK] * (frame_count - 1),
        )


def find_neighbors(
    scene_points: np.ndarray, centroid, config: PropagationConfig
) -> np.ndarray:
    """Indices of the k scene points nearest the centroid.

    Euclidean distance in the world frame; exact ties broken by lower
    index.  Fewer than k indices come back only when the point set (or the
    radius-capped subset) is smaller than k.

    Raises:
        NoGeometryError: empty scene point set.
    """
    pts = np.asarray(scene_points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise NoGeometryError("scene point set is empty")
    c = np.asarray(centroid, dtype=np.float64).reshape(3)
    k = min(config.k_neighbors, pts.shape[0])

    tree = cKDTree(pts)
    if config.radius_cap is not None:
        candidates = np.asarray(tree.query_ball_point(c, config.radius_cap), dtype=int)
        if candidates.size == 0:
            return candidates
    else:
        dist, _ = tree.query(c, k=k)
        dmax = float(np.atleast_1d(dist)[-1])
        # re-query everything within the k-th distance so that exact ties
        # can be broken deterministically by index
        candidates = np.asarray(
            tree.query_ball_point(c, dmax * (1.0 + 1e-12) + 1e-300), dtype=int
        )
    d = np.linalg.norm(pts[candidates] - c, axis=1)
    order = np.lexsort((candidates, d))
    return candidates[order][:k]


# Endpoint depth corners spreading more than this (relative) straddle a
# depth discontinuity; interpolating across one produces flying-point
# motions, so such samples are invalid.
DEPTH_SPREAD_REL = 0.2


def _corners(field: np.ndarray, u: float, v: float):
    h, w = field.shape[:2]
    x0 = min(max(int(np.floor(u)), 0), w - 1)
    y0 = min(max(int(np.floor(v)), 0), h - 1)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = u - x0
    fy = v - y0
    corners = np.stack(
        [field[y0, x0], field[y0, x1], field[y1, x0], field[y1, x1]]
    ).astype(np.float64)
    weights = np.array([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy])
    return corners, weights


def _bilinear(field: np.ndarray, u: float, v: float):
    """Bilinear sample with edge clamping; None if any corner is non-finite."""
    corners, weights = _corners(field, u, v)
    if not np.all(np.isfinite(corners)):
        return None
    if corners.ndim == 1:
        return float(weights @ corners)
    return weights @ corners


def _bilinear_depth(depth: np.ndarray, u: float, v: float):
    """Bilinear depth sample; None on invalid or discontinuous corners."""
    corners, weights = _corners(depth, u, v)
    if not np.all(np.isfinite(corners)) or np.any(corners <= 0.0):
        return None
    lo = float(corners.min())
    if (float(corners.max()) - lo) / lo > DEPTH_SPREAD_REL:
        return None
    return float(weights @ corners)


def lift_flow(
    pixel,
    flow: np.ndarray,
    depth_t: np.ndarray,
    depth_t1: np.ndarray,
    pose_t: CameraPose,
    pose_t1: CameraPose,
    intrinsics: CameraIntrinsics,
) -> np.ndarray | None:
    """Lift the 2D flow at one pixel into a 3D world-space motion vector.

    Unprojects the pixel through frame t's depth, follows the flow to the
    endpoint, unprojects that through frame t+1's depth (sampled
    bilinearly), and returns the world displacement.  Returns None (an
    invalid sample, excluded from averaging) when depth is invalid at
    either end, the flow itself is invalid, or the endpoint leaves the
    frame.
    """
    u, v = float(pixel[0]), float(pixel[1])
    h, w = depth_t.shape
    if not (0 <= u < w and 0 <= v < h):
        raise ValidationError(f"pixel ({u}, {v}) outside {w}x{h} frame")

    iu = min(int(round(u)), w - 1)
    iv = min(int(round(v)), h - 1)
    d0 = float(depth_t[iv, iu])
    if not np.isfinite(d0) or d0 <= 0.0:
        return None

    f = _bilinear(flow, u, v)
    if f is None or np.any(np.abs(f) >= FLOW_INVALID_THRESHOLD):
        return None
    end_u, end_v = u + float(f[0]), v + float(f[1])
    if not (0 <= end_u < w and 0 <= end_v < h):
        return None

    d1 = _bilinear_depth(depth_t1, end_u, end_v)
    if d1 is None:
        return None

    p0 = unproject(intrinsics, pose_t, (u, v), d0)
    p1 = unproject(intrinsics, pose_t1, (end_u, end_v), float(d1))
    return p1 - p0


def propagate_step(
    placement: RigidPlacement,
    bundle: SceneBundle,
    t: int,
    config: PropagationConfig = PropagationConfig(),
) -> tuple[RigidPlacement, str]:
    """Advance a placement from frame t to t+1.

    Returns the new placement and its provenance flag.  The translation
    moves by the arithmetic mean of the valid lifted motions; rotation and
    scale are carried over untouched.

    Raises:
        ValidationError: t is not a valid transition index.
        NoGeometryError: frame t has no scene points.
    """
    if not (0 <= t < bundle.frame_count - 1):
        raise ValidationError(
            f"step index {t} out of range for {bundle.frame_count} frames"
        )
    scene = bundle.scene_points[t]
    if len(scene) == 0:
        raise NoGeometryError(f"frame {t} has no scene points")

    idx = find_neighbors(scene.positions, placement.translation, config)
    if idx.size == 0:
        return placement, FLAG_STATIC_FALLBACK
    neighbors = scene.positions[idx]
    pixels, _, in_front = project_points(bundle.intrinsics, bundle.poses[t], neighbors)
    w, h = bundle.intrinsics.width, bundle.intrinsics.height

    motions = []
    flow_mags = []
    for pix, front in zip(pixels, in_front):
        if not front or not (0 <= pix[0] < w and 0 <= pix[1] < h):
            continue
        motion = lift_flow(
            pix,
            bundle.flows[t],
            bundle.depths[t],
            bundle.depths[t + 1],
            bundle.poses[t],
            bundle.poses[t + 1],
            bundle.intrinsics,
        )
        if motion is None:
            continue
        f = _bilinear(bundle.flows[t], float(pix[0]), float(pix[1]))
        motions.append(motion)
        flow_mags.append(float(np.hypot(f[0], f[1])))

    valid_fraction = len(motions) / idx.size
    if valid_fraction < config.min_valid_fraction:
        return placement, FLAG_STATIC_FALLBACK
    if np.mean(flow_mags) < config.static_flow_threshold:
        return placement, FLAG_STATIC_FALLBACK

    mean_motion = np.mean(np.asarray(motions), axis=0)
    moved = replace(placement, translation=placement.translation + mean_motion)

    check = project_points(
        bundle.intrinsics, bundle.poses[t + 1], moved.translation[None, :]
    )[2]
    if not check[0]:
        logger.warning(
            "propagated centroid is behind the camera in frame %d", t + 1
        )
    return moved, FLAG_PROPAGATED


def propagate_trajectory(
    placement_0: RigidPlacement,
    bundle: SceneBundle,
    config: PropagationConfig = PropagationConfig(),
    on_step=None,
) -> PlacementTrajectory:
    """Propagate the user placement across the whole bundle.

    Frame 0 is the user placement verbatim; each following frame comes
    from :func:`propagate_step`.  ``on_step(t_done, total)`` is invoked
    after each transition (progress reporting).

    Raises:
        NoGeometryError / ValidationError: step errors, annotated with the
            frame index at which they occurred.
    """
    placements = [placement_0]
    flags = [FLAG_INITIAL]
    for t in range(bundle.frame_count - 1):
        try:
            nxt, flag = propagate_step(placements[-1], bundle, t, config)
        except (NoGeometryError, ValidationError) as exc:
            raise type(exc)(f"frame {t}: {exc}") from exc
        placements.append(nxt)
        flags.append(flag)
        if on_step is not None:
            on_step(t + 1, bundle.frame_count - 1)
    return PlacementTrajectory(placements, flags)
