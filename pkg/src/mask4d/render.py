"""Occlusion-correct mask rendering via z-buffer point splatting.

Each placed object point is projected into the frame and splatted as a
disc into a per-pixel minimum-depth buffer; covered pixels survive when
the object is no deeper than the scene's depth map (within a relative
epsilon), and the surviving silhouette is cleaned up with a morphological
closing plus small-component removal.  The result is a binary mask per
frame plus optional composited preview images.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .bundle import SceneBundle, write_png
from .errors import ValidationError
from .formats import ObjectCloud
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    apply_placement,
    project_points,
)
from .propagation import PlacementTrajectory

MASK_MANIFEST_NAME = "masks_manifest.json"

# preview tint for object pixels (blended over the RGB frame)
_TINT = np.array([40, 220, 90], dtype=np.float64)
_TINT_ALPHA = 0.55


@dataclass(frozen=True)
class RenderConfig:
    """Rasterization and cleanup parameters.

    Attributes:
        splat_radius: disc radius in pixels around each projected point.
        depth_epsilon_rel: relative slack when comparing object depth to
            scene depth (reconstruction depth error grows with distance).
        closing_radius: disc radius of the morphological closing; 0 skips.
        min_mask_area: connected components smaller than this are dropped.
    """

    splat_radius: float = 1.5
    depth_epsilon_rel: float = 0.01
    closing_radius: int = 2
    min_mask_area: int = 4

    def __post_init__(self):
        if self.splat_radius <= 0:
            raise ValidationError("splat_radius must be positive")
        if not (0.0 <= self.depth_epsilon_rel < 1.0):
            raise ValidationError("depth_epsilon_rel must be in [0, 1)")
        if self.closing_radius < 0 or self.min_mask_area < 0:
            raise ValidationError("closing_radius/min_mask_area must be >= 0")


@dataclass
class MaskSequence:
    """Per-frame binary masks (0 background, 255 object) plus extras."""

    masks: list[np.ndarray]
    previews: list[np.ndarray] | None
    visible_counts: list[int]

    def __len__(self) -> int:
        return len(self.masks)


def splat_object(
    points_world,
    intrinsics: CameraIntrinsics,
    pose: CameraPose,
    config: RenderConfig = RenderConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Project points and splat them into a minimum-depth buffer.

    Points behind the camera plane or whose projection falls outside the
    image are culled; every surviving point stamps a disc of
    ``splat_radius`` pixels, keeping the smallest depth per pixel.

    Returns:
        (depth_buffer, coverage): (H, W) float64 with +inf where uncovered,
        and the (H, W) bool coverage mask.  An all-culled (or empty) input
        yields empty buffers; that is a valid result, not an error.
    """
    h, w = intrinsics.height, intrinsics.width
    zbuf = np.full((h, w), np.inf)
    pts = np.asarray(points_world, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        return zbuf, np.zeros((h, w), dtype=bool)

    pixels, depths, in_front = project_points(intrinsics, pose, pts)
    keep = in_front.copy()
    keep &= np.where(
        in_front,
        (pixels[:, 0] >= 0) & (pixels[:, 0] < w)
        & (pixels[:, 1] >= 0) & (pixels[:, 1] < h),
        False,
    )
    if not np.any(keep):
        return zbuf, np.zeros((h, w), dtype=bool)
    centers = pixels[keep]
    depths = depths[keep]

    r = config.splat_radius
    reach = int(np.ceil(r))
    offs = np.arange(-reach, reach + 2)  # covers the fractional shift
    dxg, dyg = np.meshgrid(offs, offs)
    dxg = dxg.ravel()[None, :]  # (1, K)
    dyg = dyg.ravel()[None, :]

    base_x = np.floor(centers[:, 0])[:, None]
    base_y = np.floor(centers[:, 1])[:, None]
    xs = base_x + dxg  # (M, K) candidate pixel columns
    ys = base_y + dyg
    inside = (
        ((xs - centers[:, 0:1]) ** 2 + (ys - centers[:, 1:2]) ** 2 <= r * r)
        & (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    )
    m_idx, _ = np.nonzero(inside)
    flat = (ys[inside] * w + xs[inside]).astype(np.intp)
    np.minimum.at(zbuf.ravel(), flat, depths[m_idx])
    return zbuf, np.isfinite(zbuf)


def occlusion_test(
    object_depth: np.ndarray,
    scene_depth: np.ndarray,
    config: RenderConfig = RenderConfig(),
) -> np.ndarray:
    """Per-pixel visibility of the splatted object against the scene.

    A covered pixel (finite object depth) is visible when its object depth
    does not exceed the scene depth by more than the relative epsilon.
    Pixels whose scene depth is invalid (non-positive or non-finite) count
    as visible — missing reconstruction never hides the object.

    Raises:
        ValidationError: buffer dimensions differ.
    """
    if object_depth.shape != scene_depth.shape:
        raise ValidationError(
            f"buffer shapes differ: {object_depth.shape} vs {scene_depth.shape}"
        )
    covered = np.isfinite(object_depth)
    scene = scene_depth.astype(np.float64)
    scene_valid = np.isfinite(scene) & (scene > 0.0)
    in_front = object_depth <= scene * (1.0 + config.depth_epsilon_rel)
    return covered & (~scene_valid | in_front)


def _disc_structure(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(span, span)
    return (dx * dx + dy * dy) <= radius * radius


def extract_mask(
    visibility: np.ndarray, config: RenderConfig = RenderConfig()
) -> np.ndarray:
    """Clean a visibility buffer into a binary mask (uint8 0/255).

    Morphological closing with a disc structuring element (erosion pads
    with 1 so border-touching regions are not eaten), then removal of
    8-connected components below ``min_mask_area``.
    """
    mask = visibility.astype(bool)
    if config.closing_radius > 0:
        structure = _disc_structure(config.closing_radius)
        dilated = ndimage.binary_dilation(mask, structure=structure)
        mask = ndimage.binary_erosion(dilated, structure=structure, border_value=1)
    if config.min_mask_area > 0:
        labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
        if n:
            sizes = np.bincount(labels.ravel())
            sizes[0] = 0
            keep = sizes >= config.min_mask_area
            mask = keep[labels]
    return np.where(mask, np.uint8(255), np.uint8(0))


def _composite_preview(rgb: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = rgb.astype(np.float64)
    sel = mask > 0
    out[sel] = (1.0 - _TINT_ALPHA) * out[sel] + _TINT_ALPHA * _TINT
    return np.clip(out, 0, 255).astype(np.uint8)


def render_sequence(
    obj: ObjectCloud,
    trajectory: PlacementTrajectory,
    bundle: SceneBundle,
    config: RenderConfig = RenderConfig(),
    on_frame=None,
) -> MaskSequence:
    """Render the full occlusion-tested mask sequence.

    Per frame: place the object, splat, occlusion-test against the frame's
    depth map, extract the cleaned mask; composit a preview when the
    bundle ships RGB.  A frame with no visible pixels yields an empty
    mask.  ``on_frame(done, total)`` reports progress.

    Raises:
        ValidationError: trajectory length != bundle frame count.
    """
    if len(trajectory) != bundle.frame_count:
        raise ValidationError(
            f"trajectory length {len(trajectory)} != frame count {bundle.frame_count}"
        )
    masks: list[np.ndarray] = []
    previews: list[np.ndarray] | None = (
        [] if bundle.rgb_frames is not None else None
    )
    visible_counts: list[int] = []
    h, w = bundle.intrinsics.height, bundle.intrinsics.width

    for t in range(bundle.frame_count):
        placed = apply_placement(trajectory[t], obj.points)
        zbuf, _ = splat_object(placed, bundle.intrinsics, bundle.poses[t], config)
        vis = occlusion_test(zbuf, bundle.depths[t], config)
        masks.append(extract_mask(vis, config))

        # visible points: project in-frame, in front, and visible at the
        # rounded center pixel (pre-closing buffer)
        pixels, _, in_front = project_points(
            bundle.intrinsics, bundle.poses[t], placed
        )
        count = 0
        for pix, front in zip(pixels, in_front):
            if not front:
                continue
            iu, iv = int(round(pix[0])), int(round(pix[1]))
            if 0 <= iu < w and 0 <= iv < h and vis[iv, iu]:
                count += 1
        visible_counts.append(count)

        if previews is not None:
            previews.append(_composite_preview(bundle.rgb_frames[t], masks[-1]))
        if on_frame is not None:
            on_frame(t + 1, bundle.frame_count)

    return MaskSequence(masks=masks, previews=previews, visible_counts=visible_counts)


def export_mask_sequence(
    seq: MaskSequence, out_dir, config: RenderConfig = RenderConfig()
) -> list[str]:
    """Write masks, previews and the manifest to a directory.

    Layout: ``mask/%05d.png`` (8-bit grayscale), ``preview/%05d.png`` when
    previews exist, and ``masks_manifest.json`` recording the frame count,
    the config used, and per-frame visible-point counts.

    Returns the relative paths written.
    """
    root = Path(out_dir)
    (root / "mask").mkdir(parents=True, exist_ok=True)
    written = []
    for t, mask in enumerate(seq.masks):
        name = f"mask/{t:05d}.png"
        write_png(root / name, mask)
        written.append(name)
    if seq.previews is not None:
        (root / "preview").mkdir(exist_ok=True)
        for t, preview in enumerate(seq.previews):
            name = f"preview/{t:05d}.png"
            write_png(root / name, preview)
            written.append(name)
    manifest = {
        "frame_count": len(seq.masks),
        "config": asdict(config),
        "visible_counts": seq.visible_counts,
    }
    (root / MASK_MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2), encoding="utf-8"
    )
    written.append(MASK_MANIFEST_NAME)
    return written


def export_pipeline_artifacts(
    seq: MaskSequence,
    trajectory: PlacementTrajectory,
    placement,
    out_dir,
    config: RenderConfig = RenderConfig(),
) -> list[str]:
    """Full export: masks/previews/manifest plus trajectory and placement JSON.

    This is the one writer used by both the HTTP service export and the
    headless pipeline, so the two produce byte-identical directories.
    """
    written = export_mask_sequence(seq, out_dir, config)
    root = Path(out_dir)
    (root / "trajectory.json").write_text(trajectory.to_json(), encoding="utf-8")
    (root / "placement.json").write_text(
        json.dumps(placement.to_json_obj(), indent=2), encoding="utf-8"
    )
    return written + ["trajectory.json", "placement.json"]


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two binary masks (empty-vs-empty is 1)."""
    pa = a > 0
    pb = b > 0
    union = np.logical_or(pa, pb).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pa, pb).sum() / union)


def mask_centroid(mask: np.ndarray) -> np.ndarray | None:
    """Pixel-mass centroid (u, v) of a binary mask; None when empty."""
    ys, xs = np.nonzero(mask > 0)
    if len(xs) == 0:
        return None
    return np.array([xs.mean(), ys.mean()])
