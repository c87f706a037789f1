"""Scene bundle: the on-disk contract with upstream 4D reconstruction.

A bundle directory carries per-frame depth (PFM), optical flow (.flo,
frame t→t+1 stored at index t), camera poses and intrinsics (JSON),
optional RGB frames (PNG) and optional co-shipped object clouds (PLY):

    manifest.json       frame_count, stride, file lists, format version
    intrinsics.json     {fx, fy, cx, cy, width, height}
    poses.json          [{R: 9 row-major reals, t: [3]}, ...]   world→camera
    depth/%05d.pfm
    flow/%05d.flo
    rgb/%05d.png        optional
    object/*.ply        optional

All JSON is UTF-8, all binary little-endian.  Depth values are meters;
values <= 0 or non-finite are the invalid-depth sentinel.  Scene point
sets are not stored: they are derived by unprojecting every valid depth
pixel at the manifest's subsampling stride.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import formats
from .errors import (
    FormatError,
    MissingComponentError,
    ValidationError,
)
from .geometry import CameraIntrinsics, CameraPose, unproject_pixels

MANIFEST_NAME = "manifest.json"
BUNDLE_FORMAT = "mask4d-bundle"
BUNDLE_VERSION = 1
DEFAULT_STRIDE = 2


def depth_valid_mask(depth: np.ndarray) -> np.ndarray:
    """Boolean mask of valid depth samples (finite and strictly positive)."""
    return np.isfinite(depth) & (depth > 0.0)


@dataclass
class ScenePointSet:
    """World-frame scene points for one frame, with optional colors."""

    positions: np.ndarray  # (M, 3) float64
    colors: np.ndarray | None = None  # (M, 3) uint8

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass
class SceneBundle:
    """A loaded 4D scene: intrinsics, poses, depths, flows, derived points.

    Invariants (validated on construction): one pose and one depth map per
    frame, exactly ``frame_count - 1`` flow fields, uniform dimensions
    matching the intrinsics.
    """

    intrinsics: CameraIntrinsics
    poses: list[CameraPose]
    depths: list[np.ndarray]
    flows: list[np.ndarray]
    rgb_frames: list[np.ndarray] | None = None
    stride: int = DEFAULT_STRIDE
    scene_points: list[ScenePointSet] = field(default_factory=list)

    def __post_init__(self):
        validate_bundle(self)
        if not self.scene_points:
            self.scene_points = [
                derive_scene_points(
                    self.intrinsics,
                    self.poses[t],
                    self.depths[t],
                    self.rgb_frames[t] if self.rgb_frames else None,
                    self.stride,
                )
                for t in range(self.frame_count)
            ]

    @property
    def frame_count(self) -> int:
        return len(self.poses)


def validate_bundle(bundle: SceneBundle) -> None:
    """Check structural consistency; raises ValidationError with frame index."""
    t_count = len(bundle.poses)
    if t_count < 1:
        raise ValidationError("bundle must contain at least one frame")
    if len(bundle.depths) != t_count:
        raise ValidationError(
            f"depth count {len(bundle.depths)} != frame count {t_count}"
        )
    if len(bundle.flows) != t_count - 1:
        raise ValidationError(
            f"flow count {len(bundle.flows)} != frame count - 1 ({t_count - 1})"
        )
    if bundle.rgb_frames is not None and len(bundle.rgb_frames) != t_count:
        raise ValidationError(
            f"rgb count {len(bundle.rgb_frames)} != frame count {t_count}"
        )
    if bundle.stride < 1:
        raise ValidationError(f"stride must be >= 1, got {bundle.stride}")
    shape = (bundle.intrinsics.height, bundle.intrinsics.width)
    for t, depth in enumerate(bundle.depths):
        if depth.shape != shape:
            raise ValidationError(
                f"frame {t}: depth shape {depth.shape} != intrinsics {shape}"
            )
    for t, flow in enumerate(bundle.flows):
        if flow.shape != shape + (2,):
            raise ValidationError(
                f"frame {t}: flow shape {flow.shape} != intrinsics {shape + (2,)}"
            )
    if bundle.rgb_frames is not None:
        for t, rgb in enumerate(bundle.rgb_frames):
            if rgb.shape != shape + (3,):
                raise ValidationError(
                    f"frame {t}: rgb shape {rgb.shape} != intrinsics {shape + (3,)}"
                )


def derive_scene_points(
    intrinsics: CameraIntrinsics,
    pose: CameraPose,
    depth: np.ndarray,
    rgb: np.ndarray | None,
    stride: int,
) -> ScenePointSet:
    """Unproject every valid depth pixel (at the given stride) to world space."""
    vs = np.arange(0, intrinsics.height, stride)
    us = np.arange(0, intrinsics.width, stride)
    uu, vv = np.meshgrid(us, vs)
    d = depth[vv, uu].astype(np.float64)
    valid = depth_valid_mask(d)
    if not np.any(valid):
        return ScenePointSet(np.empty((0, 3)), None)
    px = np.column_stack([uu[valid], vv[valid]]).astype(np.float64)
    positions = unproject_pixels(intrinsics, pose, px, d[valid])
    colors = None
    if rgb is not None:
        colors = rgb[vv[valid], uu[valid]].astype(np.uint8)
    return ScenePointSet(positions, colors)


# ---------------------------------------------------------------------------
# PNG helpers
# ---------------------------------------------------------------------------


def read_png(path: Path) -> np.ndarray:
    """Read a PNG into (H, W, 3) uint8 (grayscale promoted to 3 channels)."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return arr


def write_png(path: Path, image: np.ndarray) -> None:
    """Write (H, W) or (H, W, 3) uint8 data as PNG."""
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path, format="PNG")


# ---------------------------------------------------------------------------
# Bundle directory I/O
# ---------------------------------------------------------------------------


def save_bundle(bundle: SceneBundle, path) -> None:
    """Write a bundle directory; the manifest is replaced atomically last."""
    root = Path(path)
    (root / "depth").mkdir(parents=True, exist_ok=True)
    if bundle.frame_count > 1:
        (root / "flow").mkdir(exist_ok=True)
    if bundle.rgb_frames is not None:
        (root / "rgb").mkdir(exist_ok=True)

    intr = bundle.intrinsics
    (root / "intrinsics.json").write_text(
        json.dumps(
            {
                "fx": intr.fx, "fy": intr.fy,
                "cx": intr.cx, "cy": intr.cy,
                "width": intr.width, "height": intr.height,
            },
            indent=2,
        ),
        encoding="utf-8",
    )
    (root / "poses.json").write_text(
        json.dumps(
            [
                {
                    "R": [float(x) for x in pose.rotation.reshape(-1)],
                    "t": [float(x) for x in pose.translation],
                }
                for pose in bundle.poses
            ],
            indent=2,
        ),
        encoding="utf-8",
    )

    depth_files, flow_files, rgb_files = [], [], []
    for t, depth in enumerate(bundle.depths):
        name = f"depth/{t:05d}.pfm"
        (root / name).write_bytes(formats.write_pfm(depth))
        depth_files.append(name)
    for t, flow in enumerate(bundle.flows):
        name = f"flow/{t:05d}.flo"
        (root / name).write_bytes(formats.write_flo(flow))
        flow_files.append(name)
    if bundle.rgb_frames is not None:
        for t, rgb in enumerate(bundle.rgb_frames):
            name = f"rgb/{t:05d}.png"
            write_png(root / name, rgb)
            rgb_files.append(name)

    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "frame_count": bundle.frame_count,
        "stride": bundle.stride,
        "files": {"depth": depth_files, "flow": flow_files},
    }
    if rgb_files:
        manifest["files"]["rgb"] = rgb_files
    tmp = root / (MANIFEST_NAME + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    os.replace(tmp, root / MANIFEST_NAME)


def load_bundle(path, stride: int | None = None) -> SceneBundle:
    """Load and validate a bundle directory.

    Args:
        path: Bundle directory.
        stride: Override the manifest's scene-point subsampling stride.

    Raises:
        MissingComponentError: a file named by the manifest (or the
            manifest itself) is absent.
        FormatError: corrupt payloads (bad magic, truncation).
        ValidationError: structurally inconsistent contents.
    """
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise MissingComponentError(f"missing {MANIFEST_NAME} in {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != BUNDLE_FORMAT:
        raise FormatError(f"not a {BUNDLE_FORMAT} manifest: {manifest_path}")
    if manifest.get("version") != BUNDLE_VERSION:
        raise FormatError(f"unsupported bundle version {manifest.get('version')}")

    def require(name: str) -> Path:
        p = root / name
        if not p.is_file():
            raise MissingComponentError(f"missing bundle component {name}")
        return p

    intr_raw = json.loads(require("intrinsics.json").read_text(encoding="utf-8"))
    intrinsics = CameraIntrinsics(
        fx=float(intr_raw["fx"]),
        fy=float(intr_raw["fy"]),
        cx=float(intr_raw["cx"]),
        cy=float(intr_raw["cy"]),
        width=int(intr_raw["width"]),
        height=int(intr_raw["height"]),
    )
    poses_raw = json.loads(require("poses.json").read_text(encoding="utf-8"))
    poses = [
        CameraPose(np.array(p["R"], dtype=np.float64).reshape(3, 3), p["t"])
        for p in poses_raw
    ]

    frame_count = int(manifest["frame_count"])
    if len(poses) != frame_count:
        raise ValidationError(
            f"poses.json has {len(poses)} entries, manifest says {frame_count}"
        )

    files = manifest.get("files", {})
    depths = [formats.parse_pfm(require(n).read_bytes()) for n in files.get("depth", [])]
    flows = [formats.parse_flo(require(n).read_bytes()) for n in files.get("flow", [])]
    rgb_frames = None
    if "rgb" in files:
        rgb_frames = [read_png(require(n)) for n in files["rgb"]]

    return SceneBundle(
        intrinsics=intrinsics,
        poses=poses,
        depths=depths,
        flows=flows,
        rgb_frames=rgb_frames,
        stride=int(stride if stride is not None else manifest.get("stride", DEFAULT_STRIDE)),
    )


def bundles_equal(a: SceneBundle, b: SceneBundle) -> bool:
    """Field-wise equality with bit-exact array comparison (tests/tools)."""
    if a.intrinsics != b.intrinsics or a.frame_count != b.frame_count:
        return False
    if a.stride != b.stride:
        return False
    for pa, pb in zip(a.poses, b.poses):
        if not (np.array_equal(pa.rotation, pb.rotation)
                and np.array_equal(pa.translation, pb.translation)):
            return False
    for da, db in zip(a.depths, b.depths):
        if not np.array_equal(da, db):
            return False
    for fa, fb in zip(a.flows, b.flows):
        if not np.array_equal(fa, fb):
            return False
    if (a.rgb_frames is None) != (b.rgb_frames is None):
        return False
    if a.rgb_frames is not None:
        for ra, rb in zip(a.rgb_frames, b.rgb_frames):
            if not np.array_equal(ra, rb):
                return False
    return True
