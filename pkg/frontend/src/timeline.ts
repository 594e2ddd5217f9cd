// Keyframe timeline model: where the ticks and the cursor sit, and how a
// click maps back to a frame. Rendering is a strip of positioned divs.

import type { Track } from "./types";

export interface TimelineTick {
  frame: number;
  keyframe: boolean;
  source: string;
  pct: number;
}

function pctOf(frame: number, frameCount: number): number {
  if (frameCount <= 1) return 0;
  return (100 * frame) / (frameCount - 1);
}

export function timelineTicks(track: Track | null, frameCount: number): TimelineTick[] {
  if (!track || frameCount < 1) return [];
  return track.entries
    .filter((e) => e.frame >= 0 && e.frame < frameCount)
    .map((e) => ({
      frame: e.frame,
      keyframe: e.keyframe,
      source: e.source,
      pct: pctOf(e.frame, frameCount),
    }));
}

export function cursorPct(frame: number, frameCount: number): number {
  const last = Math.max(0, frameCount - 1);
  return pctOf(Math.min(last, Math.max(0, frame)), frameCount);
}

/** Inverse of the tick layout: a horizontal fraction back to a frame. */
export function frameFromOffset(fraction: number, frameCount: number): number {
  if (frameCount < 1) return 0;
  const clamped = Math.min(1, Math.max(0, fraction));
  return Math.round(clamped * (frameCount - 1));
}
