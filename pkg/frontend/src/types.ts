// Wire types for the annotation API. Field names follow the JSON the
// service sends so payloads round-trip without a mapping layer.

export const CLASSES = [
  "vehicle",
  "pedestrian",
  "cyclist",
  "motorcycle",
  "bus",
  "truck",
] as const;

export type ClassId = (typeof CLASSES)[number];

export interface Box7 {
  cx: number;
  cy: number;
  cz: number;
  length: number;
  width: number;
  height: number;
  yaw: number;
}

// on the wire a box is [cx, cy, cz, length, width, height, yaw]
export type WireBox = number[];

export interface TrackEntry {
  frame: number;
  box: Box7;
  source: string;
  keyframe: boolean;
}

export interface Track {
  id: number;
  class: string;
  entries: TrackEntry[];
}

export interface WireEntry {
  frame: number;
  box: WireBox;
  source: string;
  keyframe: boolean;
}

export interface WireTrack {
  id: number;
  class: string;
  entries: WireEntry[];
}

export function boxFromWire(b: WireBox): Box7 {
  if (b.length !== 7) throw new Error(`box must have 7 fields, got ${b.length}`);
  return { cx: b[0], cy: b[1], cz: b[2], length: b[3], width: b[4], height: b[5], yaw: b[6] };
}

export function boxToWire(b: Box7): WireBox {
  return [b.cx, b.cy, b.cz, b.length, b.width, b.height, b.yaw];
}

export function trackFromWire(t: WireTrack): Track {
  return {
    id: t.id,
    class: t.class,
    entries: t.entries.map((e) => ({
      frame: e.frame,
      box: boxFromWire(e.box),
      source: e.source,
      keyframe: e.keyframe,
    })),
  };
}

export function trackToWire(t: Track): WireTrack {
  return {
    id: t.id,
    class: t.class,
    entries: t.entries.map((e) => ({
      frame: e.frame,
      box: boxToWire(e.box),
      source: e.source,
      keyframe: e.keyframe,
    })),
  };
}

export function cloneTrack(t: Track): Track {
  return trackFromWire(trackToWire(t));
}

export function entryAt(track: Track, frame: number): TrackEntry | null {
  for (const e of track.entries) if (e.frame === frame) return e;
  return null;
}

export interface SequenceInfo {
  id: string;
  frame_count: number;
  frame_rate: number;
  bounds: number[] | null;
  revision: number;
  has_detections: boolean;
  has_ground_truth: boolean;
}

export interface Session {
  sequence_id: string;
  revision: number;
  undo_depth: number;
}

export interface StagedDoc {
  job_id: number | null;
  status: string;
  revision?: number;
  pending: number[];
  flagged: Record<string, string>;
}

export interface PropagateResult {
  revision: number;
  track_id: number;
  n_entries: number;
  notice: string | null;
}

export interface GroundDoc {
  version: number;
  cell_size: number;
  x0: number;
  y0: number;
  plane: number[];
  grid: (number | null)[][];
}

export interface ClassF1 {
  precision: number;
  recall: number;
  f1: number;
  tp: number;
  fp: number;
  fn: number;
}

export interface F1Report {
  mean_f1: number;
  iou_threshold: number;
  metric: string;
  classes: Record<string, ClassF1>;
}

// decoded point payload: positions laid out xyzxyz... for rendering
export interface PointCloud {
  count: number;
  positions: Float32Array;
  intensity: Float32Array;
}
