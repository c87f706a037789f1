"""Placement sessions, background jobs, and their lifecycle.

Sessions are in-memory; only exported artifacts touch disk.  Within a
session, mutations are serialized by a per-session lock and at most one
job runs at a time — conflicting calls get ConflictError, never corrupted
state.  Jobs execute on a bounded worker pool and are polled by id.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..bundle import SceneBundle, load_bundle
from ..errors import ConflictError, ResourceLimitError, ValidationError
from ..formats import ObjectCloud, parse_ply
from ..geometry import RigidPlacement, camera_center
from ..propagation import PlacementTrajectory, PropagationConfig, propagate_trajectory
from ..render import (
    MaskSequence,
    RenderConfig,
    export_pipeline_artifacts,
    render_sequence,
)

STATUS_IDLE = "idle"
STATUS_PROPAGATING = "propagating"
STATUS_RENDERING = "rendering"
STATUS_DONE = "done"
STATUS_ERROR = "error"

JOB_RUNNING = "running"
JOB_DONE = "done"
JOB_FAILED = "failed"


@dataclass(frozen=True)
class ServiceConfig:
    workers: int = 2
    session_limit: int = 16
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    render: RenderConfig = field(default_factory=RenderConfig)


@dataclass
class JobProgress:
    job_id: str
    session_id: str
    phase: str  # "propagate" | "render"
    frames_done: int
    frames_total: int
    status: str = JOB_RUNNING
    error: str | None = None
    revision: int = 0

    def to_obj(self) -> dict:
        return {
            "job_id": self.job_id,
            "session_id": self.session_id,
            "phase": self.phase,
            "frames_done": self.frames_done,
            "frames_total": self.frames_total,
            "status": self.status,
            "error": self.error,
            "revision": self.revision,
        }


@dataclass
class Session:
    id: str
    bundle_path: str
    object_path: str
    bundle: SceneBundle
    object_cloud: ObjectCloud
    placement: RigidPlacement
    status: str = STATUS_IDLE
    revision: int = 1
    trajectory: PlacementTrajectory | None = None
    masks: MaskSequence | None = None
    active_job: str | None = None
    render_config: RenderConfig | None = None
    lock: threading.RLock = field(default_factory=threading.RLock)

    def info(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "revision": self.revision,
            "frame_count": self.bundle.frame_count,
            "width": self.bundle.intrinsics.width,
            "height": self.bundle.intrinsics.height,
            "object_points": int(len(self.object_cloud.points)),
            "placement": self.placement.to_json_obj(),
            "has_trajectory": self.trajectory is not None,
            "has_masks": self.masks is not None,
            "active_job": self.active_job,
            "trajectory_flags": list(self.trajectory.flags) if self.trajectory else None,
            "visible_counts": list(self.masks.visible_counts) if self.masks else None,
        }


def default_placement(bundle: SceneBundle) -> RigidPlacement:
    """Identity placement one meter ahead of the frame-0 camera."""
    pose = bundle.poses[0]
    center = camera_center(pose)
    forward = pose.rotation.T @ np.array([0.0, 0.0, 1.0])
    return RigidPlacement(1.0, np.eye(3), center + forward)


class SessionManager:
    """Owns all sessions and the shared job worker pool."""

    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        self._sessions: dict[str, Session] = {}
        self._jobs: dict[str, JobProgress] = {}
        self._lock = threading.RLock()
        self._pool = ThreadPoolExecutor(max_workers=self.config.workers)

    # ── lookup ───────────────────────────────────────────────────────

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise KeyError(f"unknown session {session_id}")
        return session

    def job(self, job_id: str) -> JobProgress:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise KeyError(f"unknown job {job_id}")
        return job

    # ── session lifecycle ────────────────────────────────────────────

    def create_session(self, bundle_path: str, object_path: str) -> Session:
        with self._lock:
            if len(self._sessions) >= self.config.session_limit:
                raise ResourceLimitError(
                    f"session limit {self.config.session_limit} reached"
                )
        bundle = load_bundle(bundle_path)
        from pathlib import Path

        object_cloud = parse_ply(Path(object_path).read_bytes())
        session = Session(
            id=uuid.uuid4().hex,
            bundle_path=str(bundle_path),
            object_path=str(object_path),
            bundle=bundle,
            object_cloud=object_cloud,
            placement=default_placement(bundle),
        )
        with self._lock:
            if len(self._sessions) >= self.config.session_limit:
                raise ResourceLimitError(
                    f"session limit {self.config.session_limit} reached"
                )
            self._sessions[session.id] = session
        return session

    def delete_session(self, session_id: str) -> None:
        session = self.get(session_id)
        with session.lock:
            if session.active_job is not None:
                raise ConflictError("a job is still running in this session")
            with self._lock:
                self._sessions.pop(session_id, None)

    def set_placement(self, session_id: str, placement: RigidPlacement) -> int:
        """Replace the placement; invalidates trajectory and masks."""
        session = self.get(session_id)
        with session.lock:
            if session.active_job is not None:
                raise ConflictError("cannot mutate placement while a job is running")
            session.placement = placement
            session.trajectory = None
            session.masks = None
            session.status = STATUS_IDLE
            session.revision += 1
            return session.revision

    # ── jobs ─────────────────────────────────────────────────────────

    def _start_job(self, session: Session, phase: str, total: int, body) -> str:
        job = JobProgress(
            job_id=uuid.uuid4().hex,
            session_id=session.id,
            phase=phase,
            frames_done=0,
            frames_total=total,
            revision=session.revision,
        )
        with self._lock:
            self._jobs[job.job_id] = job
        session.active_job = job.job_id

        def run():
            try:
                body(job)
            except Exception as exc:  # surfaced through polling
                with session.lock:
                    job.status = JOB_FAILED
                    job.error = f"{type(exc).__name__}: {exc}"
                    session.status = STATUS_ERROR
                    session.active_job = None
            else:
                with session.lock:
                    job.status = JOB_DONE
                    session.status = STATUS_DONE
                    session.active_job = None

        self._pool.submit(run)
        return job.job_id

    def start_propagation(
        self, session_id: str, config: PropagationConfig | None = None
    ) -> str:
        session = self.get(session_id)
        cfg = config or self.config.propagation
        with session.lock:
            if session.active_job is not None:
                raise ConflictError("another job is already running")
            session.status = STATUS_PROPAGATING

            def body(job: JobProgress):
                def on_step(done, total):
                    job.frames_done = done

                trajectory = propagate_trajectory(
                    session.placement, session.bundle, cfg, on_step=on_step
                )
                with session.lock:
                    session.trajectory = trajectory
                    session.masks = None

            return self._start_job(
                session, "propagate", max(session.bundle.frame_count - 1, 0), body
            )

    def start_render(
        self, session_id: str, config: RenderConfig | None = None
    ) -> str:
        session = self.get(session_id)
        cfg = config or self.config.render
        with session.lock:
            if session.active_job is not None:
                raise ConflictError("another job is already running")
            if session.trajectory is None:
                raise ConflictError("render requires a propagated trajectory")
            session.status = STATUS_RENDERING
            session.render_config = cfg

            def body(job: JobProgress):
                def on_frame(done, total):
                    job.frames_done = done

                seq = render_sequence(
                    session.object_cloud,
                    session.trajectory,
                    session.bundle,
                    cfg,
                    on_frame=on_frame,
                )
                with session.lock:
                    session.masks = seq

            return self._start_job(session, "render", session.bundle.frame_count, body)

    # ── outputs ──────────────────────────────────────────────────────

    def preview_image(
        self, session_id: str, frame: int, mode: str = "composite"
    ) -> np.ndarray:
        """Preview for one frame.

        Modes: ``composite`` (object tinted over RGB; the default), ``mask``
        (the binary mask as grayscale), ``raw`` (the untouched RGB frame).
        Without rendered masks every mode falls back to the raw frame, and
        without RGB to a depth visualization.
        """
        session = self.get(session_id)
        with session.lock:
            if not (0 <= frame < session.bundle.frame_count):
                raise ValidationError(
                    f"frame {frame} out of range [0, {session.bundle.frame_count})"
                )
            if mode not in ("composite", "mask", "raw"):
                raise ValidationError(f"unknown preview mode {mode!r}")
            if mode == "mask" and session.masks is not None:
                mask = session.masks.masks[frame]
                return np.stack([mask, mask, mask], axis=-1)
            if (
                mode == "composite"
                and session.masks is not None
                and session.masks.previews is not None
            ):
                return session.masks.previews[frame]
            if session.bundle.rgb_frames is not None:
                return session.bundle.rgb_frames[frame]
            if session.masks is not None:
                mask = session.masks.masks[frame]
                return np.stack([mask, mask, mask], axis=-1)
            depth = session.bundle.depths[frame]
            valid = np.isfinite(depth) & (depth > 0)
            if valid.any():
                lo, hi = float(depth[valid].min()), float(depth[valid].max())
                span = (hi - lo) or 1.0
                gray = np.where(valid, 255 - (depth - lo) / span * 205, 0)
            else:
                gray = np.zeros_like(depth)
            gray = gray.astype(np.uint8)
            return np.stack([gray, gray, gray], axis=-1)

    def scene_payload(self, session_id: str, frame: int, stride: int = 1) -> dict:
        """Decimated frame point cloud for the UI viewer."""
        session = self.get(session_id)
        with session.lock:
            if not (0 <= frame < session.bundle.frame_count):
                raise ValidationError(
                    f"frame {frame} out of range [0, {session.bundle.frame_count})"
                )
            if stride < 1:
                raise ValidationError("stride must be >= 1")
            points = session.bundle.scene_points[frame]
            positions = points.positions[::stride]
            colors = (
                points.colors[::stride] if points.colors is not None else None
            )
            return {
                "frame": frame,
                "count": int(positions.shape[0]),
                "positions": [round(float(x), 6) for x in positions.ravel()],
                "colors": (
                    [int(x) for x in colors.ravel()] if colors is not None else None
                ),
                "revision": session.revision,
            }

    def object_payload(self, session_id: str, stride: int = 1) -> dict:
        """Decimated object-local points for the UI overlay."""
        session = self.get(session_id)
        with session.lock:
            if stride < 1:
                raise ValidationError("stride must be >= 1")
            pts = session.object_cloud.points[::stride]
            return {
                "count": int(pts.shape[0]),
                "positions": [round(float(x), 6) for x in pts.ravel()],
                "revision": session.revision,
            }

    def export(self, session_id: str, out_path: str) -> list[str]:
        session = self.get(session_id)
        with session.lock:
            if session.masks is None or session.trajectory is None:
                raise ConflictError("export requires completed propagation and render")
            cfg = session.render_config or self.config.render
            return export_pipeline_artifacts(
                session.masks, session.trajectory, session.placement, out_path, cfg
            )

    def list_sessions(self) -> list[dict]:
        with self._lock:
            return [s.info() for s in self._sessions.values()]

    def shutdown(self):
        self._pool.shutdown(wait=True)
