// Court-meter to canvas-pixel mapping, derived entirely from the service's
// frame metadata (no hard-coded pixel math).

import type { FrameMeta } from "./types";

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export class CourtGeometry {
  constructor(readonly frame: FrameMeta, readonly rect: Rect) {}

  private get worldWidth(): number {
    return this.frame.length_m + 2 * this.frame.margin_m;
  }

  private get worldHeight(): number {
    return this.frame.width_m + 2 * this.frame.margin_m;
  }

  /** Court meters -> canvas pixel inside this geometry's rectangle. */
  toCanvas(x: number, y: number): [number, number] {
    const u = (x + this.frame.margin_m) / this.worldWidth;
    const v = (y + this.frame.margin_m) / this.worldHeight;
    return [this.rect.x + u * this.rect.w, this.rect.y + v * this.rect.h];
  }

  /** Canvas pixel -> court meters (hover readouts). */
  toMeters(px: number, py: number): [number, number] {
    const u = (px - this.rect.x) / this.rect.w;
    const v = (py - this.rect.y) / this.rect.h;
    return [u * this.worldWidth - this.frame.margin_m,
            v * this.worldHeight - this.frame.margin_m];
  }

  /** Court outline segments in meters: boundary, net line, center line. */
  courtLines(): [number, number][][] {
    const L = this.frame.length_m;
    const W = this.frame.width_m;
    const net = L / 2;
    return [
      [[0, 0], [L, 0], [L, W], [0, W], [0, 0]],
      [[net, 0], [net, W]],
      [[0, W / 2], [L, W / 2]],
    ];
  }
}

/** Split a rectangle into a grid of per-panel geometries (small multiples). */
export function panelGrid(frame: FrameMeta, total: Rect, count: number,
                          columns: number, gap = 8): CourtGeometry[] {
  const rows = Math.ceil(count / columns);
  const w = (total.w - gap * (columns - 1)) / columns;
  const h = (total.h - gap * (rows - 1)) / rows;
  const out: CourtGeometry[] = [];
  for (let i = 0; i < count; i++) {
    const col = i % columns;
    const row = Math.floor(i / columns);
    out.push(new CourtGeometry(frame, {
      x: total.x + col * (w + gap),
      y: total.y + row * (h + gap),
      w,
      h,
    }));
  }
  return out;
}
