/**
 * Canvas point-cloud viewer: scene points plus the placed object cloud.
 *
 * Points are splatted as small rects, far-to-near so closer points paint
 * over farther ones.  The object is drawn green once acknowledged and
 * amber while a pending (uncommitted) edit is active.
 */

import { OrbitCamera } from './camera.js';
import { matVec, Vec3 } from './matrix.js';
import type { GizmoState } from './gizmo.js';
import type { ScenePayload } from './types.js';

const ACKNOWLEDGED_COLOR = 'rgb(60, 220, 110)';
const PENDING_COLOR = 'rgb(255, 180, 40)';

export class PointCloudViewer {
  readonly camera = new OrbitCamera();
  private scene: ScenePayload | null = null;
  private objectLocal: Vec3[] = [];

  constructor(private canvas: HTMLCanvasElement) {}

  setScene(payload: ScenePayload): void {
    this.scene = payload;
    // aim the orbit at the cloud's median depth for a sensible default
    if (payload.count > 0) {
      const zs: number[] = [];
      for (let i = 0; i < payload.count; i++) zs.push(payload.positions[i * 3 + 2]);
      zs.sort((a, b) => a - b);
      this.camera.target[2] = zs[Math.floor(zs.length / 2)];
    }
  }

  setObject(points: Vec3[]): void {
    this.objectLocal = points;
  }

  get scenePointCount(): number {
    return this.scene?.count ?? 0;
  }

  draw(gizmo: GizmoState): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = '#10141c';
    ctx.fillRect(0, 0, width, height);
    if (!this.scene) return;

    type Splat = { u: number; v: number; z: number; color: string; size: number };
    const splats: Splat[] = [];

    for (let i = 0; i < this.scene.count; i++) {
      const p: Vec3 = [
        this.scene.positions[i * 3],
        this.scene.positions[i * 3 + 1],
        this.scene.positions[i * 3 + 2],
      ];
      const proj = this.camera.project(p, width, height);
      if (!proj) continue;
      let color = 'rgb(150, 150, 160)';
      if (this.scene.colors) {
        color = `rgb(${this.scene.colors[i * 3]}, ${this.scene.colors[i * 3 + 1]}, ${this.scene.colors[i * 3 + 2]})`;
      }
      splats.push({ u: proj[0], v: proj[1], z: proj[2], color, size: 2 });
    }

    const objColor = gizmo.dirty ? PENDING_COLOR : ACKNOWLEDGED_COLOR;
    for (const local of this.objectLocal) {
      const rotated = matVec(gizmo.rotation, local);
      const world: Vec3 = [
        gizmo.scale * rotated[0] + gizmo.translation[0],
        gizmo.scale * rotated[1] + gizmo.translation[1],
        gizmo.scale * rotated[2] + gizmo.translation[2],
      ];
      const proj = this.camera.project(world, width, height);
      if (!proj) continue;
      splats.push({ u: proj[0], v: proj[1], z: proj[2], color: objColor, size: 3 });
    }

    splats.sort((a, b) => b.z - a.z);
    for (const s of splats) {
      ctx.fillStyle = s.color;
      ctx.fillRect(s.u - s.size / 2, s.v - s.size / 2, s.size, s.size);
    }
  }
}
