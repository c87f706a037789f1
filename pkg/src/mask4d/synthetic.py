"""Analytic synthetic scenes with exact ground truth.

Stands in for a real 4D reconstruction at desk scale: every depth, pose
and flow field is generated from closed-form primitives (infinite wall and
floor planes, axis-aligned boxes with constant per-frame velocity), so
tests can query exact depths, trajectories and visibility.

Scene kinds:
    ground-plane    static wall + floor; optionally a translating camera
    moving-carrier  wall + floor + a box translating at constant velocity
    orbit-camera    wall + floor + a static pedestal box; camera orbits
    occluder-sweep  wall + floor + a thin box sweeping across the view in
                    front of a recommended object anchor point

Generated bundles are mutually consistent by construction: the flow at
every valid pixel equals the reprojected displacement of that pixel's 3D
point between frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import SceneBundle
from .errors import ValidationError
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    camera_center,
    look_at_pose,
    project_points,
)

SCENE_KINDS = ("ground-plane", "moving-carrier", "orbit-camera", "occluder-sweep")

# written into .flo where a moved point falls behind the camera (never the
# case for the shipped scene kinds, but kept defined)
FLOW_SENTINEL = 1e9


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Parameters for an analytic test scene."""

    kind: str
    width: int = 64
    height: int = 64
    frame_count: int = 8
    focal: float = 70.0
    stride: int = 1
    include_rgb: bool = True

    wall_depth: float = 4.0
    floor_y: float = 0.9
    camera_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    carrier_center: tuple[float, float, float] = (0.0, 0.55, 2.2)
    carrier_size: tuple[float, float, float] = (0.8, 0.5, 0.7)
    carrier_velocity: tuple[float, float, float] = (0.05, 0.0, 0.0)

    orbit_radius: float = 2.4
    orbit_target: tuple[float, float, float] = (0.0, 0.3, 2.2)
    orbit_arc_deg: float = 40.0
    orbit_height: float = -0.4

    occluder_center: tuple[float, float, float] = (-1.2, 0.25, 1.5)
    occluder_size: tuple[float, float, float] = (0.5, 0.7, 0.12)
    occluder_velocity: tuple[float, float, float] = (0.35, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValidationError(f"unknown scene kind {self.kind!r}")
        if self.width < 16 or self.height < 16:
            raise ValidationError("resolution must be at least 16x16")
        if self.frame_count < 2:
            raise ValidationError("synthetic scenes need at least 2 frames")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            fx=self.focal,
            fy=self.focal,
            cx=self.width / 2.0,
            cy=self.height / 2.0,
            width=self.width,
            height=self.height,
        )


@dataclass
class _Plane:
    """Infinite axis-aligned plane: axis ('y' or 'z') = value. Static."""

    axis: str
    value: float
    color: tuple[int, int, int]
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def raycast(self, origin: np.ndarray, dirs: np.ndarray, t: int) -> np.ndarray:
        i = 1 if self.axis == "y" else 2
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (self.value - origin[i]) / dirs[..., i]
        s = np.where(np.isfinite(s) & (s > 1e-9), s, np.inf)
        return s


@dataclass
class _Box:
    """Axis-aligned box translating at a constant per-frame velocity."""

    center: np.ndarray
    half: np.ndarray
    color: tuple[int, int, int]
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def center_at(self, t: int) -> np.ndarray:
        return self.center + t * self.velocity

    def raycast(self, origin: np.ndarray, dirs: np.ndarray, t: int) -> np.ndarray:
        c = self.center_at(t)
        lo, hi = c - self.half, c + self.half
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (lo - origin) * inv
            t2 = (hi - origin) * inv
        near = np.nanmax(np.minimum(t1, t2), axis=-1)
        far = np.nanmin(np.maximum(t1, t2), axis=-1)
        hit = (near <= far) & (far > 1e-9) & (near > 1e-9)
        return np.where(hit, near, np.inf)


@dataclass
class SyntheticTruth:
    """Exact ground truth accompanying a synthetic bundle.

    ``hit_ids[t]`` holds the index (into ``primitives``) of the surface
    seen at each pixel, -1 where no primitive was hit.
    """

    spec: SyntheticSceneSpec
    primitives: list
    poses: list[CameraPose]
    hit_ids: list[np.ndarray]
    carrier_index: int | None = None
    occluder_index: int | None = None
    object_anchor: np.ndarray | None = None

    @property
    def camera_centers(self) -> np.ndarray:
        return np.stack([camera_center(p) for p in self.poses])

    def primitive_velocity(self, index: int) -> np.ndarray:
        return np.asarray(self.primitives[index].velocity, dtype=np.float64)

    def carrier_positions(self) -> np.ndarray:
        """Carrier box center per frame, (T, 3)."""
        if self.carrier_index is None:
            raise ValidationError("scene has no carrier")
        box = self.primitives[self.carrier_index]
        return np.stack([box.center_at(t) for t in range(self.spec.frame_count)])

    def occluder_positions(self) -> np.ndarray:
        if self.occluder_index is None:
            raise ValidationError("scene has no occluder")
        box = self.primitives[self.occluder_index]
        return np.stack([box.center_at(t) for t in range(self.spec.frame_count)])

    def depth_at(self, t: int, u, v) -> np.ndarray:
        """Analytic scene depth along the rays of continuous pixels (u, v)."""
        intr = self.spec.intrinsics()
        pose = self.poses[t]
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        d_cam = np.stack(
            [(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones_like(u)],
            axis=-1,
        )
        dirs = d_cam @ pose.rotation  # R^T per row
        origin = camera_center(pose)
        best = np.full(u.shape, np.inf)
        for prim in self.primitives:
            best = np.minimum(best, prim.raycast(origin, dirs, t))
        return best

    def visible(self, t: int, points_world, depth_eps_rel: float) -> np.ndarray:
        """Analytic visibility of world points in frame t.

        A point is visible when it projects in front of the camera, inside
        the frame, and its depth does not exceed the analytic scene depth
        along its pixel ray by more than the relative epsilon.
        """
        intr = self.spec.intrinsics()
        pixels, depths, in_front = project_points(intr, self.poses[t], points_world)
        ok = in_front.copy()
        ok &= np.where(
            in_front,
            (pixels[:, 0] >= 0)
            & (pixels[:, 0] < intr.width)
            & (pixels[:, 1] >= 0)
            & (pixels[:, 1] < intr.height),
            False,
        )
        vis = np.zeros(len(ok), dtype=bool)
        if np.any(ok):
            scene = self.depth_at(t, pixels[ok, 0], pixels[ok, 1])
            vis[ok] = depths[ok] <= scene * (1.0 + depth_eps_rel)
        return vis


def _build_primitives(spec: SyntheticSceneSpec):
    prims = [
        _Plane("z", spec.wall_depth, color=(168, 168, 176)),
        _Plane("y", spec.floor_y, color=(120, 110, 100)),
    ]
    carrier = occluder = None
    anchor = None
    if spec.kind == "moving-carrier":
        prims.append(
            _Box(
                np.asarray(spec.carrier_center, dtype=np.float64),
                np.asarray(spec.carrier_size, dtype=np.float64) / 2.0,
                color=(205, 140, 60),
                velocity=np.asarray(spec.carrier_velocity, dtype=np.float64),
            )
        )
        carrier = len(prims) - 1
        top_y = spec.carrier_center[1] - spec.carrier_size[1] / 2.0
        anchor = np.array(
            [spec.carrier_center[0], top_y - 0.15, spec.carrier_center[2]]
        )
    elif spec.kind == "orbit-camera":
        target = np.asarray(spec.orbit_target, dtype=np.float64)
        prims.append(
            _Box(
                target + np.array([0.0, 0.35, 0.0]),
                np.array([0.25, 0.35, 0.25]),
                color=(90, 150, 90),
            )
        )
        # hover above the pedestal so the whole object stays unoccluded
        anchor = target + np.array([0.0, -0.35, 0.0])
    elif spec.kind == "occluder-sweep":
        prims.append(
            _Box(
                np.asarray(spec.occluder_center, dtype=np.float64),
                np.asarray(spec.occluder_size, dtype=np.float64) / 2.0,
                color=(80, 95, 205),
                velocity=np.asarray(spec.occluder_velocity, dtype=np.float64),
            )
        )
        occluder = len(prims) - 1
        anchor = np.array([0.0, 0.25, 2.5])
    return prims, carrier, occluder, anchor


def _build_poses(spec: SyntheticSceneSpec) -> list[CameraPose]:
    if spec.kind == "orbit-camera":
        target = np.asarray(spec.orbit_target, dtype=np.float64)
        arc = np.radians(spec.orbit_arc_deg)
        angles = (
            np.linspace(-arc / 2.0, arc / 2.0, spec.frame_count)
            if spec.frame_count > 1
            else np.array([0.0])
        )
        poses = []
        for theta in angles:
            center = target + np.array(
                [
                    spec.orbit_radius * np.sin(theta),
                    spec.orbit_height,
                    -spec.orbit_radius * np.cos(theta),
                ]
            )
            poses.append(look_at_pose(center, target))
        return poses
    vel = np.asarray(spec.camera_velocity, dtype=np.float64)
    return [
        CameraPose(np.eye(3), -(vel * t)) for t in range(spec.frame_count)
    ]


def synthesize_scene(spec: SyntheticSceneSpec) -> tuple[SceneBundle, SyntheticTruth]:
    """Generate an analytic scene bundle plus its exact ground-truth record."""
    intr = spec.intrinsics()
    prims, carrier, occluder, anchor = _build_primitives(spec)
    poses = _build_poses(spec)

    uu, vv = np.meshgrid(
        np.arange(intr.width, dtype=np.float64),
        np.arange(intr.height, dtype=np.float64),
    )
    d_cam = np.stack(
        [(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy, np.ones_like(uu)],
        axis=-1,
    )

    depths, hit_ids, rgb_frames = [], [], []
    hits_world = []  # (H, W, 3) world point per pixel, per frame
    for t, pose in enumerate(poses):
        origin = camera_center(pose)
        dirs = d_cam @ pose.rotation
        s_all = np.stack([p.raycast(origin, dirs, t) for p in prims])
        ids = np.argmin(s_all, axis=0)
        s = np.take_along_axis(s_all, ids[None], axis=0)[0]
        miss = ~np.isfinite(s)
        ids = np.where(miss, -1, ids)
        depth = np.where(miss, 0.0, s).astype(np.float32)
        depths.append(depth)
        hit_ids.append(ids.astype(np.int8))
        hits_world.append(origin + np.where(miss[..., None], 0.0, s[..., None]) * dirs)
        if spec.include_rgb:
            img = np.zeros((intr.height, intr.width, 3), dtype=np.uint8)
            for i, prim in enumerate(prims):
                sel = ids == i
                shade = np.clip(1.0 - 0.06 * (s[sel] - 1.0), 0.55, 1.0)
                img[sel] = np.clip(
                    np.asarray(prim.color)[None, :] * shade[:, None], 0, 255
                ).astype(np.uint8)
            rgb_frames.append(img)

    flows = []
    for t in range(spec.frame_count - 1):
        same_pose = np.array_equal(
            poses[t].rotation, poses[t + 1].rotation
        ) and np.array_equal(poses[t].translation, poses[t + 1].translation)
        moved_mask = np.zeros((intr.height, intr.width), dtype=bool)
        moved = hits_world[t].copy()
        for i, prim in enumerate(prims):
            vel = np.asarray(prim.velocity, dtype=np.float64)
            if np.any(vel != 0.0):
                sel = hit_ids[t] == i
                moved[sel] += vel
                moved_mask |= sel
        flow = np.zeros((intr.height, intr.width, 2))
        # static pose + unmoved point => displacement is exactly zero; only
        # reproject where something actually changed
        recompute = moved_mask if same_pose else np.ones_like(moved_mask)
        if np.any(recompute):
            px, _, in_front = project_points(
                intr, poses[t + 1], moved[recompute].reshape(-1, 3)
            )
            flow[recompute, 0] = px[:, 0] - uu[recompute]
            flow[recompute, 1] = px[:, 1] - vv[recompute]
            bad = np.zeros_like(moved_mask)
            bad[recompute] = ~in_front
            flow[bad] = FLOW_SENTINEL
        flow[hit_ids[t] < 0] = FLOW_SENTINEL
        flows.append(flow.astype(np.float32))

    bundle = SceneBundle(
        intrinsics=intr,
        poses=poses,
        depths=depths,
        flows=flows,
        rgb_frames=rgb_frames if spec.include_rgb else None,
        stride=spec.stride,
    )
    truth = SyntheticTruth(
        spec=spec,
        primitives=prims,
        poses=poses,
        hit_ids=hit_ids,
        carrier_index=carrier,
        occluder_index=occluder,
        object_anchor=anchor,
    )
    return bundle, truth


def make_ball_cloud(radius: float = 0.12, count: int = 500, seed: int = 0):
    """A near-uniform ball of points centered at the local origin.

    Fibonacci-spiral surface points plus seeded interior jitter; handy as
    a synthetic object for placement and rendering tests.
    """
    from .formats import ObjectCloud

    n_surface = count // 2
    k = np.arange(n_surface, dtype=np.float64)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    y = 1.0 - 2.0 * (k + 0.5) / n_surface
    r_ring = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    theta = golden * k
    surface = radius * np.column_stack(
        [r_ring * np.cos(theta), y, r_ring * np.sin(theta)]
    )
    rng = np.random.default_rng(seed)
    interior = rng.normal(size=(count - n_surface, 3))
    interior /= np.linalg.norm(interior, axis=1, keepdims=True)
    interior *= radius * rng.uniform(0.0, 1.0, size=(count - n_surface, 1)) ** (1 / 3)
    points = np.vstack([surface, interior])
    shade = np.clip(150 + 300 * points[:, 1] / max(radius, 1e-9), 40, 255)
    colors = np.column_stack([shade, shade * 0.55, shade * 0.25]).astype(np.uint8)
    return ObjectCloud(points, colors)
