/**
 * Typed client for the session-service HTTP API.
 *
 * Every placement travels as full-precision JSON; nothing is rounded on
 * the way in or out, so a GET after a PUT reproduces the committed values
 * exactly.
 */

import type {
  JobProgress,
  OverlayMode,
  PlacementJson,
  ScenePayload,
  SessionInfo,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** 409: a job is running or a precondition is unmet; wait and retry. */
export class ConflictError extends ApiError {}

async function parseError(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    detail = body.detail ?? JSON.stringify(body);
  } catch {
    // non-JSON error body; keep the status text
  }
  if (resp.status === 409) throw new ConflictError(resp.status, detail);
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(private base: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, {
      headers: { 'content-type': 'application/json' },
      ...init,
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  createSession(bundlePath: string, objectPath: string): Promise<SessionInfo> {
    return this.request<SessionInfo>('/sessions', {
      method: 'POST',
      body: JSON.stringify({ bundle_path: bundlePath, object_path: objectPath }),
    });
  }

  getSession(id: string): Promise<SessionInfo> {
    return this.request<SessionInfo>(`/sessions/${id}`);
  }

  async putPlacement(
    id: string,
    placement: PlacementJson,
  ): Promise<{ revision: number; placement: PlacementJson }> {
    return this.request(`/sessions/${id}/placement`, {
      method: 'PUT',
      body: JSON.stringify(placement),
    });
  }

  startPropagate(id: string): Promise<{ job_id: string; revision: number }> {
    return this.request(`/sessions/${id}/propagate`, { method: 'POST' });
  }

  startRender(id: string): Promise<{ job_id: string; revision: number }> {
    return this.request(`/sessions/${id}/render`, { method: 'POST' });
  }

  getJob(jobId: string): Promise<JobProgress> {
    return this.request<JobProgress>(`/jobs/${jobId}`);
  }

  getScene(id: string, frame: number, stride = 1): Promise<ScenePayload> {
    return this.request<ScenePayload>(
      `/sessions/${id}/scene/${frame}?stride=${stride}`,
    );
  }

  previewUrl(id: string, frame: number, overlay: OverlayMode): string {
    const mode = overlay === 'none' ? 'raw' : overlay;
    return `${this.base}/sessions/${id}/preview/${frame}?mode=${mode}`;
  }

  async fetchPreview(
    id: string,
    frame: number,
    overlay: OverlayMode,
  ): Promise<{ bytes: ArrayBuffer; revision: number }> {
    const resp = await fetch(this.previewUrl(id, frame, overlay));
    if (!resp.ok) await parseError(resp);
    return {
      bytes: await resp.arrayBuffer(),
      revision: Number(resp.headers.get('X-Revision') ?? '0'),
    };
  }

  exportSession(id: string, outPath: string): Promise<{ written: string[] }> {
    return this.request(`/sessions/${id}/export`, {
      method: 'POST',
      body: JSON.stringify({ out_path: outPath }),
    });
  }

  /** Poll a job until it leaves the running state. */
  async waitForJob(
    jobId: string,
    intervalMs = 500,
    onProgress?: (job: JobProgress) => void,
  ): Promise<JobProgress> {
    for (;;) {
      const job = await this.getJob(jobId);
      onProgress?.(job);
      if (job.status !== 'running') return job;
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }
}
