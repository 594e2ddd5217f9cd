// Bird's-eye-view canvas: the primary editing surface. World x points
// right on screen, world y points up, scale is pixels per meter.

import { corners } from "./boxes";
import { POINT_COLOR, SELECT_COLOR, trackColor } from "./colors";
import type { Box7, PointCloud, Track } from "./types";
import { entryAt } from "./types";

export interface BevCamera {
  cx: number;
  cy: number;
  scale: number;
}

// the slice of CanvasRenderingContext2D the renderer actually touches,
// so tests can substitute a recording stub
export interface Ctx2D {
  canvas: { width: number; height: number };
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  setLineDash(segments: number[]): void;
}

export function worldToScreen(cam: BevCamera, w: number, h: number, x: number, y: number): [number, number] {
  return [w / 2 + (x - cam.cx) * cam.scale, h / 2 - (y - cam.cy) * cam.scale];
}

export function screenToWorld(cam: BevCamera, w: number, h: number, sx: number, sy: number): [number, number] {
  return [cam.cx + (sx - w / 2) / cam.scale, cam.cy - (sy - h / 2) / cam.scale];
}

export function drawPoints(ctx: Ctx2D, cam: BevCamera, cloud: PointCloud) {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = POINT_COLOR;
  ctx.globalAlpha = 0.8;
  for (let i = 0; i < cloud.count; i++) {
    const [sx, sy] = worldToScreen(cam, width, height, cloud.positions[3 * i], cloud.positions[3 * i + 1]);
    if (sx < 0 || sy < 0 || sx >= width || sy >= height) continue;
    ctx.fillRect(sx, sy, 1, 1);
  }
  ctx.globalAlpha = 1;
}

export interface BoxStyle {
  color: string;
  lineWidth?: number;
  dashed?: boolean;
  keyframe?: boolean;
  selected?: boolean;
}

const HANDLE_PX = 4;

export function drawBox(ctx: Ctx2D, cam: BevCamera, box: Box7, style: BoxStyle) {
  const { width, height } = ctx.canvas;
  const pts = corners(box).map(([x, y]) => worldToScreen(cam, width, height, x, y));
  ctx.strokeStyle = style.selected ? SELECT_COLOR : style.color;
  ctx.lineWidth = style.lineWidth ?? (style.selected ? 3 : 1.5);
  ctx.setLineDash(style.dashed ? [6, 4] : []);
  ctx.beginPath();
  ctx.moveTo(pts[0][0], pts[0][1]);
  for (let i = 1; i < pts.length; i++) ctx.lineTo(pts[i][0], pts[i][1]);
  ctx.closePath();
  ctx.stroke();

  // heading tick from center through the middle of the front edge
  const [cx, cy] = worldToScreen(cam, width, height, box.cx, box.cy);
  const fx = (pts[0][0] + pts[3][0]) / 2;
  const fy = (pts[0][1] + pts[3][1]) / 2;
  ctx.beginPath();
  ctx.moveTo(cx, cy);
  ctx.lineTo(fx, fy);
  ctx.stroke();
  ctx.setLineDash([]);

  if (style.keyframe) {
    // solid corner handles mark annotator-trusted frames
    ctx.fillStyle = style.selected ? SELECT_COLOR : style.color;
    for (const [px, py] of pts) {
      ctx.fillRect(px - HANDLE_PX / 2, py - HANDLE_PX / 2, HANDLE_PX, HANDLE_PX);
    }
  }
}

export interface FrameDrawOptions {
  selected?: number | null;
  flagged?: Set<number>;
  pendingBox?: Box7 | null;
}

/** Full repaint; returns how many boxes were drawn (entries at `frame`). */
export function drawFrame(
  ctx: Ctx2D,
  cam: BevCamera,
  cloud: PointCloud | null,
  tracks: Track[],
  frame: number,
  opts: FrameDrawOptions = {},
): number {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  if (cloud) drawPoints(ctx, cam, cloud);
  const flagged = opts.flagged ?? new Set<number>();
  let drawn = 0;
  for (const track of tracks) {
    const entry = entryAt(track, frame);
    if (!entry) continue;
    drawBox(ctx, cam, entry.box, {
      color: trackColor(track.class, flagged.has(track.id)),
      dashed: flagged.has(track.id),
      keyframe: entry.keyframe,
      selected: track.id === opts.selected,
    });
    drawn++;
  }
  if (opts.pendingBox) {
    drawBox(ctx, cam, opts.pendingBox, { color: SELECT_COLOR, dashed: true });
  }
  return drawn;
}
