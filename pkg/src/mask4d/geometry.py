"""Pure geometry kernels: rotations, rigid placements, pinhole projection.

Conventions used throughout the package:

  World / camera frames (right-handed, computer-vision style):
    - Camera X right, Y down, Z forward (optical axis into the scene).
    - Camera poses are world→camera: ``p_cam = R @ p_world + t``.
  Image frame:
    - ``u`` grows right, ``v`` grows down, origin at the top-left pixel
      center; pixel coordinates are continuous (sub-pixel).
  Units:
    - All positions and depths in meters, angles in radians.

Everything here is a pure function over immutable values; the dataclasses
never mutate their arrays after construction and may be shared freely
across threads.  All internal math is double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDepthError, InvalidGeometryError

# Orthonormality drift below this is accepted as-is; above it (and up to
# _REPAIR_LIMIT) the matrix is snapped back onto SO(3).
ORTHONORMAL_TOL = 1e-9
_REPAIR_LIMIT = 1e-2


def ensure_rotation(matrix: np.ndarray) -> np.ndarray:
    """Validate a 3x3 rotation matrix, repairing small orthonormality drift.

    Drift (Frobenius norm of ``R^T R - I``) up to ``ORTHONORMAL_TOL`` is
    accepted unchanged.  Larger drift, up to a repair limit, is corrected
    by projecting onto the nearest rotation (polar decomposition via SVD);
    this keeps long chains of incremental edits from drifting off SO(3).

    Args:
        matrix: Array-like of shape (3, 3).

    Returns:
        A float64 (3, 3) rotation with det +1.

    Raises:
        InvalidGeometryError: non-finite entries, reflections (det < 0),
            or drift beyond the repair limit.
    """
    r = np.asarray(matrix, dtype=np.float64)
    if r.shape != (3, 3):
        raise InvalidGeometryError(f"rotation must be 3x3, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise InvalidGeometryError("rotation contains non-finite entries")

    drift = np.linalg.norm(r.T @ r - np.eye(3))
    if drift > _REPAIR_LIMIT:
        raise InvalidGeometryError(
            f"matrix is not orthonormal (drift {drift:.3e} exceeds repair limit)"
        )
    if drift > ORTHONORMAL_TOL:
        u, _, vt = np.linalg.svd(r)
        r = u @ vt
        if np.linalg.det(r) < 0:
            r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    if np.linalg.det(r) < 0:
        raise InvalidGeometryError("matrix is a reflection (det = -1), not a rotation")
    return r


def _as_finite_vec3(value, what: str) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(v)):
        raise InvalidGeometryError(f"{what} contains non-finite components")
    return v


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics (focal lengths and principal point in pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidGeometryError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidGeometryError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidGeometryError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        """The 3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class CameraPose:
    """World→camera rigid transform: ``p_cam = rotation @ p_world + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", ensure_rotation(self.rotation))
        object.__setattr__(
            self, "translation", _as_finite_vec3(self.translation, "pose translation")
        )

    @staticmethod
    def identity() -> "CameraPose":
        return CameraPose(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class RigidPlacement:
    """Similarity transform placing an object cloud in the world.

    Applies ``y' = scale * rotation @ y + translation`` to object-local
    points.  Scale is a single positive global factor.
    """

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise InvalidGeometryError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "rotation", ensure_rotation(self.rotation))
        object.__setattr__(
            self,
            "translation",
            _as_finite_vec3(self.translation, "placement translation"),
        )

    @staticmethod
    def identity() -> "RigidPlacement":
        return RigidPlacement(1.0, np.eye(3), np.zeros(3))

    def to_json_obj(self) -> dict:
        return {
            "scale": float(self.scale),
            "R": [float(x) for x in self.rotation.reshape(-1)],
            "t": [float(x) for x in self.translation],
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "RigidPlacement":
        return RigidPlacement(
            scale=float(obj["scale"]),
            rotation=np.array(obj["R"], dtype=np.float64).reshape(3, 3),
            translation=np.array(obj["t"], dtype=np.float64),
        )


def apply_placement(placement: RigidPlacement, points) -> np.ndarray:
    """Apply a rigid placement to object-local points.

    Args:
        placement: The similarity transform.
        points: Array-like of shape (N, 3) in object-local coordinates.

    Returns:
        Float64 (N, 3) array, same order: ``scale * R @ y + t`` per row.

    Raises:
        InvalidGeometryError: any input point is non-finite.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise InvalidGeometryError("input points contain non-finite coordinates")
    return placement.scale * pts @ placement.rotation.T + placement.translation


def project(
    intrinsics: CameraIntrinsics, pose: CameraPose, point_world
) -> tuple[tuple[float, float], float] | None:
    """Project one world point onto the image plane.

    Returns:
        ``((u, v), depth)`` with continuous pixel coordinates (which may
        lie outside the image bounds) and the camera-frame depth, or
        ``None`` when the point is at or behind the camera plane
        (``z <= 0``); callers cull those.
    """
    p = _as_finite_vec3(point_world, "point")
    p_cam = pose.rotation @ p + pose.translation
    z = p_cam[2]
    if z <= 0.0:
        return None
    u = intrinsics.fx * p_cam[0] / z + intrinsics.cx
    v = intrinsics.fy * p_cam[1] / z + intrinsics.cy
    return (u, v), z


def project_points(
    intrinsics: CameraIntrinsics, pose: CameraPose, points_world
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection of many world points.

    Args:
        points_world: (N, 3) array-like.

    Returns:
        Tuple ``(pixels, depths, in_front)``: (N, 2) float64 pixel
        coordinates, (N,) depths, and an (N,) bool mask that is False for
        points at or behind the camera plane.  Pixel rows for culled
        points are NaN.
    """
    pts = np.asarray(points_world, dtype=np.float64).reshape(-1, 3)
    p_cam = pts @ pose.rotation.T + pose.translation
    z = p_cam[:, 2]
    in_front = z > 0.0
    pixels = np.full((pts.shape[0], 2), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        pixels[in_front, 0] = (
            intrinsics.fx * p_cam[in_front, 0] / z[in_front] + intrinsics.cx
        )
        pixels[in_front, 1] = (
            intrinsics.fy * p_cam[in_front, 1] / z[in_front] + intrinsics.cy
        )
    return pixels, z, in_front


def unproject(
    intrinsics: CameraIntrinsics, pose: CameraPose, pixel, depth: float
) -> np.ndarray:
    """Lift one pixel with a known depth back to a world point.

    Exact inverse of :func:`project`: ``project(unproject(px, d))`` returns
    ``(px, d)`` up to floating-point error.

    Raises:
        InvalidDepthError: ``depth <= 0`` or non-finite.
    """
    if not np.isfinite(depth) or depth <= 0.0:
        raise InvalidDepthError(f"depth must be positive and finite, got {depth}")
    u, v = float(pixel[0]), float(pixel[1])
    p_cam = np.array(
        [
            depth * (u - intrinsics.cx) / intrinsics.fx,
            depth * (v - intrinsics.cy) / intrinsics.fy,
            depth,
        ]
    )
    return pose.rotation.T @ (p_cam - pose.translation)


def unproject_pixels(
    intrinsics: CameraIntrinsics, pose: CameraPose, pixels, depths
) -> np.ndarray:
    """Vectorized :func:`unproject` for (N, 2) pixels and (N,) depths."""
    px = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    d = np.asarray(depths, dtype=np.float64).reshape(-1)
    if d.shape[0] != px.shape[0]:
        raise InvalidDepthError("pixels and depths must have matching length")
    if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
        raise InvalidDepthError("depths must be positive and finite")
    p_cam = np.empty((px.shape[0], 3))
    p_cam[:, 0] = d * (px[:, 0] - intrinsics.cx) / intrinsics.fx
    p_cam[:, 1] = d * (px[:, 1] - intrinsics.cy) / intrinsics.fy
    p_cam[:, 2] = d
    return (p_cam - pose.translation) @ pose.rotation


def compose_rotations(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compose two rotations (``a`` after ``b``), re-orthonormalized."""
    return ensure_rotation(ensure_rotation(a) @ ensure_rotation(b))


def rotation_from_axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` by ``angle`` radians.

    Raises:
        InvalidGeometryError: zero-length or non-finite axis.
    """
    ax = _as_finite_vec3(axis, "axis")
    n = np.linalg.norm(ax)
    if n == 0.0:
        raise InvalidGeometryError("rotation axis must have non-zero length")
    x, y, z = ax / n
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    r = np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)
    return ensure_rotation(r)


def invert_pose(pose: CameraPose) -> CameraPose:
    """Invert a world→camera pose (yielding camera→world as a pose)."""
    r_inv = pose.rotation.T
    return CameraPose(r_inv, -(r_inv @ pose.translation))


def camera_center(pose: CameraPose) -> np.ndarray:
    """Camera optical center in world coordinates: ``-R^T t``."""
    return -(pose.rotation.T @ pose.translation)


def look_at_pose(center, target, world_down=(0.0, 1.0, 0.0)) -> CameraPose:
    """Build a world→camera pose for a camera at ``center`` facing ``target``.

    ``world_down`` is the world direction that should map to camera +Y
    (image down); the default matches scenes authored with +Y pointing
    toward the floor.
    """
    c = _as_finite_vec3(center, "camera center")
    forward = _as_finite_vec3(target, "target") - c
    n = np.linalg.norm(forward)
    if n == 0.0:
        raise InvalidGeometryError("look-at target coincides with camera center")
    z_axis = forward / n
    down = _as_finite_vec3(world_down, "world_down")
    x_axis = np.cross(down, z_axis)
    nx = np.linalg.norm(x_axis)
    if nx < 1e-12:
        raise InvalidGeometryError("view direction is parallel to world_down")
    x_axis /= nx
    y_axis = np.cross(z_axis, x_axis)
    rotation = np.stack([x_axis, y_axis, z_axis])
    return CameraPose(rotation, -(rotation @ c))
