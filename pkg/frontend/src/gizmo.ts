/**
 * Gizmo state: the pending placement edit and its commit bookkeeping.
 *
 * Edits are optimistic: `dirty` is true until the server acknowledges the
 * exact committed revision, and the viewer draws the pending object in a
 * distinct color while that is the case.  Rotations are composed locally
 * as axis-angle increments; the server re-orthonormalizes on commit.
 */

import {
  axisAngle,
  IDENTITY,
  Mat3,
  matMul,
  Vec3,
} from './matrix.js';
import type { GizmoMode, PlacementJson } from './types.js';

export class GizmoState {
  mode: GizmoMode = 'translate';
  scale = 1.0;
  rotation: Mat3 = [...IDENTITY];
  translation: Vec3 = [0, 0, 1];
  /** true while local edits are not yet acknowledged by the server */
  dirty = false;
  /** last revision the server acknowledged for this placement */
  acknowledgedRevision = 0;

  static fromJson(obj: PlacementJson, revision: number): GizmoState {
    const g = new GizmoState();
    g.scale = obj.scale;
    g.rotation = [...obj.R];
    g.translation = [obj.t[0], obj.t[1], obj.t[2]];
    g.dirty = false;
    g.acknowledgedRevision = revision;
    return g;
  }

  toJson(): PlacementJson {
    return {
      scale: this.scale,
      R: [...this.rotation],
      t: [...this.translation],
    };
  }

  translate(axis: Vec3, delta: number): void {
    this.translation = [
      this.translation[0] + axis[0] * delta,
      this.translation[1] + axis[1] * delta,
      this.translation[2] + axis[2] * delta,
    ];
    this.dirty = true;
  }

  /** Compose an axis-angle increment on the left: R <- dR @ R. */
  rotate(axis: Vec3, angle: number): void {
    this.rotation = matMul(axisAngle(axis, angle), this.rotation);
    this.dirty = true;
  }

  scaleBy(factor: number): void {
    if (factor <= 0) throw new Error('scale factor must be positive');
    this.scale *= factor;
    this.dirty = true;
  }

  /** Apply one gizmo step along the active mode's axis. */
  step(axis: Vec3, amount: number): void {
    if (this.mode === 'translate') this.translate(axis, amount);
    else if (this.mode === 'rotate') this.rotate(axis, amount);
    else this.scaleBy(1 + amount);
  }

  /** Mark the state as acknowledged by the server at `revision`. */
  acknowledge(obj: PlacementJson, revision: number): void {
    this.scale = obj.scale;
    this.rotation = [...obj.R];
    this.translation = [obj.t[0], obj.t[1], obj.t[2]];
    this.dirty = false;
    this.acknowledgedRevision = revision;
  }
}
