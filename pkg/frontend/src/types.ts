/**
 * DTOs mirroring the session-service JSON payloads.
 */

/** Similarity transform, serialized exactly as the server stores it. */
export interface PlacementJson {
  scale: number;
  R: number[]; // 9 row-major
  t: number[]; // 3
}

export interface SessionInfo {
  id: string;
  status: 'idle' | 'propagating' | 'rendering' | 'done' | 'error';
  revision: number;
  frame_count: number;
  width: number;
  height: number;
  object_points: number;
  placement: PlacementJson;
  has_trajectory: boolean;
  has_masks: boolean;
  active_job: string | null;
  trajectory_flags: string[] | null;
  visible_counts: number[] | null;
}

export interface JobProgress {
  job_id: string;
  session_id: string;
  phase: 'propagate' | 'render';
  frames_done: number;
  frames_total: number;
  status: 'running' | 'done' | 'failed';
  error: string | null;
  revision: number;
}

export interface ScenePayload {
  frame: number;
  count: number;
  positions: number[]; // flat xyz triplets
  colors: number[] | null; // flat rgb triplets
  revision: number;
}

export type OverlayMode = 'none' | 'mask' | 'composite';

/** Orbit-camera view parameters plus scrubber state. */
export interface ViewState {
  azimuth: number;
  elevation: number;
  distance: number;
  target: [number, number, number];
  frame: number;
  overlay: OverlayMode;
}

export type GizmoMode = 'translate' | 'rotate' | 'scale';
