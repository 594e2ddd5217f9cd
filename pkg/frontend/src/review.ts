// Staged auto-label review. The engine has already committed the staged
// tracks; the review queue is the annotator's checklist over them, with
// flagged tracklets surfaced first.

import type { ApiClient } from "./api";
import type { StagedDoc, Track } from "./types";

export interface ReviewItem {
  trackId: number;
  flagged: boolean;
  reason: string | null;
  class: string | null;
  frames: number;
}

export function reviewQueue(staged: StagedDoc, tracks: Track[]): ReviewItem[] {
  const byId = new Map(tracks.map((t) => [t.id, t]));
  const items = staged.pending.map((tid) => {
    const track = byId.get(tid) ?? null;
    const reason = staged.flagged[String(tid)] ?? null;
    return {
      trackId: tid,
      flagged: reason !== null,
      reason,
      class: track ? track.class : null,
      frames: track ? track.entries.length : 0,
    };
  });
  // flagged first, stable by id within each half
  return [
    ...items.filter((i) => i.flagged).sort((a, b) => a.trackId - b.trackId),
    ...items.filter((i) => !i.flagged).sort((a, b) => a.trackId - b.trackId),
  ];
}

export function flaggedIds(staged: StagedDoc): Set<number> {
  return new Set(Object.keys(staged.flagged).map(Number));
}

export function acceptAll(client: ApiClient, sid: string): Promise<StagedDoc> {
  return client.stagedAccept(sid);
}

export function acceptOne(client: ApiClient, sid: string, trackId: number): Promise<StagedDoc> {
  return client.stagedAccept(sid, [trackId]);
}

/** Reject deletes the staged track from the annotations as one edit. */
export function rejectOne(
  client: ApiClient,
  sid: string,
  revision: number,
  trackId: number,
): Promise<StagedDoc> {
  return client.stagedReject(sid, revision, [trackId]);
}

/** One-click orientation fix: flip every frame of the tracklet in place. */
export function flipTrack(
  client: ApiClient,
  sid: string,
  track: Track,
  revision: number,
): Promise<{ revision: number }> {
  return client.flip(sid, track.id, revision, track.entries.map((e) => e.frame));
}
