/**
 * Operator tool wiring: session loading, gizmo edits, job control,
 * and preview scrubbing.  Stateless across reloads except for the
 * session id carried in the URL (?session=...).
 */

import { ApiClient, ConflictError } from './api.js';
import { GizmoState } from './gizmo.js';
import type { Vec3 } from './matrix.js';
import type { GizmoMode, OverlayMode, SessionInfo } from './types.js';
import { PointCloudViewer } from './viewer.js';

const POLL_INTERVAL_MS = 500;
const TRANSLATE_STEP = 0.05; // meters
const ROTATE_STEP = Math.PI / 36; // 5 degrees
const SCALE_STEP = 0.05;

const AXES: Record<string, Vec3> = {
  x: [1, 0, 0],
  y: [0, 1, 0],
  z: [0, 0, 1],
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class App {
  private api: ApiClient;
  private viewer: PointCloudViewer;
  private gizmo = new GizmoState();
  private session: SessionInfo | null = null;
  private polling = false;

  constructor(baseUrl: string) {
    this.api = new ApiClient(baseUrl);
    this.viewer = new PointCloudViewer(el<HTMLCanvasElement>('viewport'));
    this.wireControls();
    const sessionId = new URLSearchParams(location.search).get('session');
    if (sessionId) void this.loadSession(sessionId);
  }

  // ── session ────────────────────────────────────────────────────────

  async createSession(): Promise<void> {
    const bundle = el<HTMLInputElement>('bundle-path').value.trim();
    const object = el<HTMLInputElement>('object-path').value.trim();
    await this.guard(async () => {
      const info = await this.api.createSession(bundle, object);
      const url = new URL(location.href);
      url.searchParams.set('session', info.id);
      history.replaceState(null, '', url);
      await this.loadSession(info.id);
    });
  }

  async loadSession(id: string): Promise<void> {
    await this.guard(async () => {
      const info = await this.api.getSession(id);
      this.session = info;
      this.gizmo = GizmoState.fromJson(info.placement, info.revision);
      const scene = await this.api.getScene(id, 0, this.sceneStride());
      const object = await fetch(
        `${el<HTMLInputElement>('server-url').value.trim()}/sessions/${id}/object?stride=2`,
      ).then((r) => r.json());
      const pts: Vec3[] = [];
      for (let i = 0; i < object.count; i++) {
        pts.push([
          object.positions[i * 3],
          object.positions[i * 3 + 1],
          object.positions[i * 3 + 2],
        ]);
      }
      this.viewer.setScene(scene);
      this.viewer.setObject(pts);
      el('point-count').textContent =
        `${scene.count} scene points, ${object.count} object points`;
      const scrubber = el<HTMLInputElement>('frame-scrubber');
      scrubber.max = String(info.frame_count - 1);
      scrubber.value = '0';
      this.redraw();
      this.refreshStatus();
      this.refreshPreview();
    });
  }

  // ── gizmo ──────────────────────────────────────────────────────────

  setMode(mode: GizmoMode): void {
    this.gizmo.mode = mode;
    for (const m of ['translate', 'rotate', 'scale']) {
      el(`mode-${m}`).classList.toggle('active', m === mode);
    }
  }

  nudge(axisName: string, sign: number): void {
    const axis = AXES[axisName];
    const amount =
      this.gizmo.mode === 'translate'
        ? TRANSLATE_STEP * sign
        : this.gizmo.mode === 'rotate'
          ? ROTATE_STEP * sign
          : SCALE_STEP * sign;
    this.gizmo.step(axis, amount);
    this.redraw();
    this.refreshStatus();
  }

  async commitPlacement(): Promise<void> {
    if (!this.session) return;
    const body = this.gizmo.toJson();
    try {
      const resp = await this.api.putPlacement(this.session.id, body);
      this.gizmo.acknowledge(resp.placement, resp.revision);
      this.session = await this.api.getSession(this.session.id);
      this.banner('');
      this.redraw();
      this.refreshStatus();
      this.refreshPreview();
    } catch (err) {
      if (err instanceof ConflictError) {
        this.modal('A job is still running. Wait for it to finish, then commit again.');
      } else {
        this.banner(String(err));
      }
    }
  }

  // ── jobs ───────────────────────────────────────────────────────────

  async runPropagate(): Promise<void> {
    await this.runJob(() => this.api.startPropagate(this.session!.id));
  }

  async runRender(): Promise<void> {
    await this.runJob(() => this.api.startRender(this.session!.id));
  }

  private async runJob(
    start: () => Promise<{ job_id: string }>,
  ): Promise<void> {
    if (!this.session || this.polling) return;
    await this.guard(async () => {
      const { job_id } = await start();
      this.polling = true;
      try {
        const done = await this.api.waitForJob(job_id, POLL_INTERVAL_MS, (job) => {
          el('job-progress').textContent =
            `${job.phase}: ${job.frames_done}/${job.frames_total} frames`;
        });
        el('job-progress').textContent =
          done.status === 'done'
            ? `${done.phase}: complete`
            : `${done.phase}: ${done.status} (${done.error ?? ''})`;
      } finally {
        this.polling = false;
      }
      this.session = await this.api.getSession(this.session!.id);
      this.refreshStatus();
      this.refreshPreview();
    });
  }

  // ── preview ────────────────────────────────────────────────────────

  refreshPreview(): void {
    if (!this.session) return;
    const frame = Number(el<HTMLInputElement>('frame-scrubber').value);
    const overlay = el<HTMLSelectElement>('overlay-mode').value as OverlayMode;
    const img = el<HTMLImageElement>('preview-image');
    // revision busts the browser cache whenever results change
    img.src =
      this.api.previewUrl(this.session.id, frame, overlay) +
      `&_r=${this.session.revision}-${this.session.has_masks ? 1 : 0}`;
    el('frame-label').textContent =
      `frame ${frame} / ${this.session.frame_count - 1}`;
  }

  // ── chrome ─────────────────────────────────────────────────────────

  private sceneStride(): number {
    return Number(el<HTMLInputElement>('scene-stride').value) || 2;
  }

  private refreshStatus(): void {
    if (!this.session) return;
    const flags = this.session.trajectory_flags;
    el('status-line').textContent =
      `session ${this.session.id.slice(0, 8)} | status ${this.session.status} ` +
      `| revision ${this.session.revision}` +
      `${this.gizmo.dirty ? ' | UNCOMMITTED EDIT' : ''}` +
      `${flags ? ` | trajectory: ${flags.filter((f) => f === 'propagated').length} propagated` : ''}`;
    el('commit-button').classList.toggle('dirty', this.gizmo.dirty);
  }

  private redraw(): void {
    this.viewer.draw(this.gizmo);
  }

  private banner(message: string): void {
    const node = el('error-banner');
    node.textContent = message;
    node.style.display = message ? 'block' : 'none';
  }

  private modal(message: string): void {
    const node = el('modal');
    el('modal-text').textContent = message;
    node.style.display = 'flex';
  }

  private async guard(body: () => Promise<void>): Promise<void> {
    try {
      await body();
      this.banner('');
    } catch (err) {
      this.banner(`${String(err)} — check the server and retry.`);
    }
  }

  private wireControls(): void {
    el('create-button').addEventListener('click', () => void this.createSession());
    el('commit-button').addEventListener('click', () => void this.commitPlacement());
    el('propagate-button').addEventListener('click', () => void this.runPropagate());
    el('render-button').addEventListener('click', () => void this.runRender());
    el('modal-close').addEventListener('click', () => {
      el('modal').style.display = 'none';
    });
    for (const mode of ['translate', 'rotate', 'scale'] as GizmoMode[]) {
      el(`mode-${mode}`).addEventListener('click', () => this.setMode(mode));
    }
    for (const axis of ['x', 'y', 'z']) {
      el(`${axis}-minus`).addEventListener('click', () => this.nudge(axis, -1));
      el(`${axis}-plus`).addEventListener('click', () => this.nudge(axis, +1));
    }
    el('frame-scrubber').addEventListener('input', () => this.refreshPreview());
    el('overlay-mode').addEventListener('change', () => this.refreshPreview());

    const canvas = el<HTMLCanvasElement>('viewport');
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    canvas.addEventListener('mousedown', (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
    });
    window.addEventListener('mouseup', () => (dragging = false));
    window.addEventListener('mousemove', (e) => {
      if (!dragging) return;
      this.viewer.camera.orbit(
        (e.clientX - lastX) * 0.01,
        (e.clientY - lastY) * 0.01,
      );
      lastX = e.clientX;
      lastY = e.clientY;
      this.redraw();
    });
    canvas.addEventListener('wheel', (e) => {
      e.preventDefault();
      this.viewer.camera.zoom(e.deltaY > 0 ? 1.1 : 0.9);
      this.redraw();
    });
  }
}

declare global {
  interface Window {
    mask4dApp: App;
  }
}

if (typeof document !== 'undefined' && document.getElementById('viewport')) {
  const base = el<HTMLInputElement>('server-url').value.trim();
  window.mask4dApp = new App(base);
}
