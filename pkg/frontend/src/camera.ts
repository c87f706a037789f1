/**
 * Orbit camera for the placement viewport.
 *
 * Uses the same convention as the scene data: camera X right, Y down,
 * Z forward; the orbit keeps the target centered, azimuth spins around
 * the world vertical (world -Y is up), elevation tilts above/below.
 */

import { cross, Mat3, matVec, normalize, sub, Vec3 } from './matrix.js';

export class OrbitCamera {
  azimuth = 0;
  elevation = 0.25;
  distance = 3.5;
  target: Vec3 = [0, 0.2, 2.2];
  fov = Math.PI / 3;

  center(): Vec3 {
    const ce = Math.cos(this.elevation);
    return [
      this.target[0] + this.distance * ce * Math.sin(this.azimuth),
      this.target[1] - this.distance * Math.sin(this.elevation),
      this.target[2] - this.distance * ce * Math.cos(this.azimuth),
    ];
  }

  /** World→camera rotation rows: [right, down, forward]. */
  rotation(): Mat3 {
    const c = this.center();
    const forward = normalize(sub(this.target, c));
    const worldDown: Vec3 = [0, 1, 0];
    let right = cross(worldDown, forward);
    const n = Math.hypot(right[0], right[1], right[2]);
    if (n < 1e-9) right = [1, 0, 0];
    else right = [right[0] / n, right[1] / n, right[2] / n];
    const down = cross(forward, right);
    return [...right, ...down, ...forward];
  }

  /**
   * Project a world point to canvas pixels.
   * Returns null for points at or behind the camera plane.
   */
  project(p: Vec3, width: number, height: number): [number, number, number] | null {
    const r = this.rotation();
    const c = this.center();
    const local = matVec(r, sub(p, c));
    if (local[2] <= 1e-9) return null;
    const f = 0.5 * height / Math.tan(this.fov / 2);
    const u = width / 2 + (f * local[0]) / local[2];
    const v = height / 2 + (f * local[1]) / local[2];
    return [u, v, local[2]];
  }

  orbit(dAzimuth: number, dElevation: number): void {
    this.azimuth += dAzimuth;
    const cap = Math.PI / 2 - 0.05;
    this.elevation = Math.min(cap, Math.max(-cap, this.elevation + dElevation));
  }

  zoom(factor: number): void {
    this.distance = Math.min(50, Math.max(0.2, this.distance * factor));
  }
}
