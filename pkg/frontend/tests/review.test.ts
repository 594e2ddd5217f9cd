import { describe, expect, it } from "vitest";

import type { ApiClient } from "../src/api";
import { acceptAll, acceptOne, flaggedIds, flipTrack, rejectOne, reviewQueue } from "../src/review";
import type { StagedDoc, Track } from "../src/types";

function staged(pending: number[], flagged: Record<string, string> = {}): StagedDoc {
  return { job_id: 1, status: "done", revision: 3, pending, flagged };
}

function track(id: number, cls: string, nFrames = 4): Track {
  return {
    id,
    class: cls,
    entries: Array.from({ length: nFrames }, (_, i) => ({
      frame: i,
      box: { cx: 0, cy: 0, cz: 1, length: 4, width: 2, height: 1.6, yaw: 0 },
      source: "model",
      keyframe: false,
    })),
  };
}

describe("reviewQueue", () => {
  it("sorts flagged tracklets first, stable by id within each half", () => {
    const doc = staged([4, 1, 3, 2], { "3": "short tracklet", "1": "low score" });
    const queue = reviewQueue(doc, [track(1, "vehicle"), track(2, "truck"), track(3, "bus"), track(4, "cyclist")]);
    expect(queue.map((i) => i.trackId)).toEqual([1, 3, 2, 4]);
    expect(queue[0].flagged).toBe(true);
    expect(queue[1].reason).toBe("short tracklet");
    expect(queue[2].flagged).toBe(false);
  });

  it("joins class and length from the annotation snapshot", () => {
    const queue = reviewQueue(staged([7]), [track(7, "pedestrian", 9)]);
    expect(queue[0].class).toBe("pedestrian");
    expect(queue[0].frames).toBe(9);
  });

  it("tolerates staged ids missing from the snapshot", () => {
    const queue = reviewQueue(staged([5]), []);
    expect(queue[0].class).toBeNull();
    expect(queue[0].frames).toBe(0);
  });

  it("flaggedIds collects the numeric keys", () => {
    expect(flaggedIds(staged([1, 2], { "2": "x" }))).toEqual(new Set([2]));
  });
});

describe("review actions", () => {
  function stubClient() {
    const calls: { method: string; args: unknown[] }[] = [];
    const doc = staged([]);
    const client = {
      stagedAccept: (...args: unknown[]) => {
        calls.push({ method: "stagedAccept", args });
        return Promise.resolve(doc);
      },
      stagedReject: (...args: unknown[]) => {
        calls.push({ method: "stagedReject", args });
        return Promise.resolve(doc);
      },
      flip: (...args: unknown[]) => {
        calls.push({ method: "flip", args });
        return Promise.resolve({ revision: 4 });
      },
    } as unknown as ApiClient;
    return { client, calls };
  }

  it("accept-all sends no id filter so the engine accepts everything", async () => {
    const { client, calls } = stubClient();
    await acceptAll(client, "seq");
    expect(calls).toEqual([{ method: "stagedAccept", args: ["seq"] }]);
  });

  it("accept-one narrows to a single id", async () => {
    const { client, calls } = stubClient();
    await acceptOne(client, "seq", 8);
    expect(calls).toEqual([{ method: "stagedAccept", args: ["seq", [8]] }]);
  });

  it("reject carries the revision for the delete edit", async () => {
    const { client, calls } = stubClient();
    await rejectOne(client, "seq", 12, 8);
    expect(calls).toEqual([{ method: "stagedReject", args: ["seq", 12, [8]] }]);
  });

  it("one-click flip reorients every frame of the tracklet", async () => {
    const { client, calls } = stubClient();
    await flipTrack(client, "seq", track(3, "vehicle", 5), 2);
    expect(calls).toEqual([{ method: "flip", args: ["seq", 3, 2, [0, 1, 2, 3, 4]] }]);
  });
});
