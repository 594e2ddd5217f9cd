// Box edit gestures in BEV space. Every gesture produces a new box; the
// entry that received a human edit switches its source to "manual".

import type { Box7, Track, TrackEntry } from "./types";

export const MIN_SIZE = 0.1;

export type Gesture =
  | { kind: "move"; dx: number; dy: number; dz?: number }
  | { kind: "resize"; dl: number; dw: number; dh?: number }
  | { kind: "rotate"; dyaw: number };

/** Wrap into (-pi, pi]. */
export function normalizeYaw(yaw: number): number {
  let a = yaw % (2 * Math.PI);
  if (a <= -Math.PI) a += 2 * Math.PI;
  else if (a > Math.PI) a -= 2 * Math.PI;
  return a;
}

export function applyGesture(box: Box7, g: Gesture): Box7 {
  const out = { ...box };
  if (g.kind === "move") {
    out.cx += g.dx;
    out.cy += g.dy;
    out.cz += g.dz ?? 0;
  } else if (g.kind === "resize") {
    out.length = Math.max(MIN_SIZE, out.length + g.dl);
    out.width = Math.max(MIN_SIZE, out.width + g.dw);
    out.height = Math.max(MIN_SIZE, out.height + (g.dh ?? 0));
  } else {
    out.yaw = normalizeYaw(out.yaw + g.dyaw);
  }
  return out;
}

/** BEV footprint corners, counter-clockwise from front-left. */
export function corners(box: Box7): [number, number][] {
  const c = Math.cos(box.yaw);
  const s = Math.sin(box.yaw);
  const hl = box.length / 2;
  const hw = box.width / 2;
  const local: [number, number][] = [
    [hl, hw],
    [-hl, hw],
    [-hl, -hw],
    [hl, -hw],
  ];
  return local.map(([x, y]) => [box.cx + c * x - s * y, box.cy + s * x + c * y]);
}

export function containsPoint(box: Box7, x: number, y: number): boolean {
  const c = Math.cos(-box.yaw);
  const s = Math.sin(-box.yaw);
  const dx = x - box.cx;
  const dy = y - box.cy;
  const lx = c * dx - s * dy;
  const ly = s * dx + c * dy;
  return Math.abs(lx) <= box.length / 2 && Math.abs(ly) <= box.width / 2;
}

export interface Hit {
  trackId: number;
  entry: TrackEntry;
}

/** Topmost box under a BEV point; smallest footprint wins on overlap. */
export function hitTest(tracks: Track[], frame: number, x: number, y: number): Hit | null {
  let best: Hit | null = null;
  let bestArea = Infinity;
  for (const track of tracks) {
    for (const entry of track.entries) {
      if (entry.frame !== frame) continue;
      if (!containsPoint(entry.box, x, y)) continue;
      const area = entry.box.length * entry.box.width;
      if (area < bestArea) {
        best = { trackId: track.id, entry };
        bestArea = area;
      }
    }
  }
  return best;
}

export interface EditResult {
  track: Track;
  promoted: boolean;
}

/**
 * Apply a gesture to the entry at `frame`, returning a new track. In batch
 * mode a refined non-keyframe is promoted to keyframe so interpolation can
 * re-run between the annotator's trusted frames.
 */
export function editEntry(
  track: Track,
  frame: number,
  gesture: Gesture,
  mode: "single" | "batch",
): EditResult {
  const idx = track.entries.findIndex((e) => e.frame === frame);
  if (idx < 0) throw new Error(`track ${track.id} has no entry at frame ${frame}`);
  const old = track.entries[idx];
  const promoted = mode === "batch" && !old.keyframe;
  const edited: TrackEntry = {
    frame: old.frame,
    box: applyGesture(old.box, gesture),
    source: "manual",
    keyframe: promoted ? true : old.keyframe,
  };
  const entries = track.entries.slice();
  entries[idx] = edited;
  return { track: { id: track.id, class: track.class, entries }, promoted };
}
