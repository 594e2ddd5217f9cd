import type {
  Box7,
  F1Report,
  GroundDoc,
  PointCloud,
  PropagateResult,
  SequenceInfo,
  Session,
  StagedDoc,
  Track,
  WireTrack,
} from "./types";
import { boxToWire, trackFromWire, trackToWire } from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 409: the revision sent with a mutation is no longer the head. */
export class ConflictError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "ConflictError";
  }
}

/** Raw little-endian float32 records of x, y, z, intensity. */
export function decodePoints(buf: ArrayBuffer): PointCloud {
  const raw = new Float32Array(buf);
  const count = Math.floor(raw.length / 4);
  const positions = new Float32Array(count * 3);
  const intensity = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    positions[3 * i] = raw[4 * i];
    positions[3 * i + 1] = raw[4 * i + 1];
    positions[3 * i + 2] = raw[4 * i + 2];
    intensity[i] = raw[4 * i + 3];
  }
  return { count, positions, intensity };
}

async function fail(resp: Response): Promise<never> {
  let detail = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body, keep the status line
  }
  if (resp.status === 409) throw new ConflictError(detail);
  throw new ApiError(resp.status, detail);
}

export interface PropagateArgs {
  revision: number;
  startFrame: number;
  classId: string;
  box: Box7;
  n?: number;
  trackId?: number;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, init);
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listSequences(): Promise<SequenceInfo[]> {
    return this.json("/sequences");
  }

  session(sid: string): Promise<Session> {
    return this.json(`/sequences/${sid}/session`);
  }

  async points(sid: string, frame: number, decimate = 1): Promise<PointCloud> {
    const url = `${this.base}/sequences/${sid}/frames/${frame}/points?decimate=${decimate}`;
    const resp = await fetch(url);
    if (!resp.ok) await fail(resp);
    return decodePoints(await resp.arrayBuffer());
  }

  async annotations(sid: string): Promise<{ revision: number; tracks: Track[] }> {
    const doc = await this.json<{ revision: number; tracks: WireTrack[] }>(
      `/sequences/${sid}/annotations`,
    );
    return { revision: doc.revision, tracks: doc.tracks.map(trackFromWire) };
  }

  putAnnotations(sid: string, revision: number, tracks: Track[]): Promise<{ revision: number }> {
    return this.json(`/sequences/${sid}/annotations`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ revision, tracks: tracks.map(trackToWire) }),
    });
  }

  autolabel(
    sid: string,
    revision: number,
    opts: { scoreFloor?: number; nmsIou?: number } = {},
  ): Promise<StagedDoc> {
    const body: Record<string, unknown> = { revision };
    if (opts.scoreFloor !== undefined) body.score_floor = opts.scoreFloor;
    if (opts.nmsIou !== undefined) body.nms_iou = opts.nmsIou;
    return this.post(`/sequences/${sid}/autolabel`, body);
  }

  jobStatus(sid: string, jobId: number): Promise<StagedDoc> {
    return this.json(`/sequences/${sid}/jobs/${jobId}`);
  }

  staged(sid: string): Promise<StagedDoc> {
    return this.json(`/sequences/${sid}/staged`);
  }

  stagedAccept(sid: string, trackIds?: number[]): Promise<StagedDoc> {
    const body = trackIds === undefined ? {} : { track_ids: trackIds };
    return this.post(`/sequences/${sid}/staged/accept`, body);
  }

  stagedReject(sid: string, revision: number, trackIds: number[]): Promise<StagedDoc> {
    return this.post(`/sequences/${sid}/staged/reject`, { revision, track_ids: trackIds });
  }

  propagate(sid: string, args: PropagateArgs): Promise<PropagateResult> {
    const body: Record<string, unknown> = {
      revision: args.revision,
      start_frame: args.startFrame,
      class_id: args.classId,
      box: boxToWire(args.box),
    };
    if (args.n !== undefined) body.n = args.n;
    if (args.trackId !== undefined) body.track_id = args.trackId;
    return this.post(`/sequences/${sid}/propagate`, body);
  }

  interpolate(sid: string, tid: number, revision: number): Promise<{ revision: number }> {
    return this.post(`/sequences/${sid}/tracks/${tid}/interpolate`, { revision });
  }

  smooth(sid: string, tid: number, revision: number, weight?: number): Promise<{ revision: number }> {
    const body: Record<string, unknown> = { revision };
    if (weight !== undefined) body.weight = weight;
    return this.post(`/sequences/${sid}/tracks/${tid}/smooth`, body);
  }

  reorient(sid: string, tid: number, revision: number): Promise<{ revision: number }> {
    return this.post(`/sequences/${sid}/tracks/${tid}/reorient`, { revision });
  }

  flip(sid: string, tid: number, revision: number, frames: number[]): Promise<{ revision: number }> {
    return this.post(`/sequences/${sid}/tracks/${tid}/flip`, { revision, frames });
  }

  idFix(
    sid: string,
    tid: number,
    revision: number,
    fromFrame: number,
    newId: number,
  ): Promise<{ revision: number }> {
    return this.post(`/sequences/${sid}/tracks/${tid}/idfix`, {
      revision,
      from_frame: fromFrame,
      new_id: newId,
    });
  }

  undo(sid: string, revision: number): Promise<{ revision: number; undid: number }> {
    return this.post(`/sequences/${sid}/undo`, { revision });
  }

  evalF1(
    sid: string,
    opts: { iouThreshold?: number; metric?: string } = {},
  ): Promise<F1Report> {
    const body: Record<string, unknown> = { sequence_id: sid, kind: "f1" };
    if (opts.iouThreshold !== undefined) body.iou_threshold = opts.iouThreshold;
    if (opts.metric !== undefined) body.metric = opts.metric;
    return this.post("/eval", body);
  }

  ground(sid: string): Promise<GroundDoc> {
    return this.json(`/sequences/${sid}/ground`);
  }

  async groundHeight(sid: string, x: number, y: number): Promise<number> {
    const doc = await this.json<{ z: number }>(
      `/sequences/${sid}/ground/height?x=${x}&y=${y}`,
    );
    return doc.z;
  }
}
