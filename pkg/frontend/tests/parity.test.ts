// End-to-end parity against a real annotation service: the UI client and
// the CLI must produce identical stored annotations for identical inputs.
// Spawns `serve` on a scratch project built by the CLI synthesizer.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import type { Box7, Track, WireTrack } from "../src/types";
import { boxToWire, entryAt, trackFromWire } from "../src/types";

const SEED_BOX: Box7 = { cx: -35, cy: -3, cz: 0.8, length: 4.2, width: 1.9, height: 1.6, yaw: 0 };
const SEED_ARGS = ["--frame", "0", "--class-id", "vehicle",
  "--box", "-35", "-3", "0.8", "4.2", "1.9", "1.6", "0"];

let proj: string;
let server: ChildProcess | null = null;
let client: ApiClient;
let cliPropagate: { revision: number; track_id: number; n_entries: number; notice: string | null };

function cli(args: string[]): string {
  return execFileSync("python3", ["-m", "lidarlabel.cli", ...args], { encoding: "utf-8" });
}

function synth(sid: string, seed: number, preset: string, extra: string[] = []) {
  cli(["synth", "--out", proj, "--sequence", sid, "--preset", preset,
    "--seed", String(seed), ...extra]);
}

async function waitForServer(c: ApiClient) {
  for (let i = 0; i < 200; i++) {
    try {
      await c.listSequences();
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  throw new Error("annotation service never came up");
}

beforeAll(async () => {
  proj = mkdtempSync(join(tmpdir(), "parity-"));
  // two identical sequences (same seed) for the UI-vs-CLI comparison and a
  // noise-free, occlusion-free one for the staged accept-all check
  synth("a", 7, "crossing");
  synth("b", 7, "crossing");
  synth("c", 11, "small", ["--duration", "60",
    "--dropout", "0", "--box-noise", "0", "--fp-rate", "0"]);

  // the CLI side of the parity pair runs before the service owns the project
  cliPropagate = JSON.parse(cli(["propagate", "--project", proj, "--sequence", "b",
    ...SEED_ARGS, "--json"]));
  cli(["ground", "--project", proj, "--sequence", "a"]);

  const port = 8200 + (process.pid % 500);
  server = spawn("python3", ["-m", "lidarlabel.cli", "serve", "--project", proj,
    "--port", String(port)], { stdio: ["ignore", "pipe", "pipe"] });
  client = new ApiClient(`http://127.0.0.1:${port}`);
  await waitForServer(client);
}, 180_000);

afterAll(() => {
  server?.kill();
  if (proj) rmSync(proj, { recursive: true, force: true });
});

/**
 * Greedy one-to-one matching: every expected track must find a distinct
 * actual track of the same class whose entries agree frame-for-frame on
 * all seven box fields within tol.
 */
function sameAnnotations(actual: Track[], expected: Track[], tol = 1e-9): boolean {
  if (actual.length !== expected.length) return false;
  const free = new Set(actual.map((_, i) => i));
  for (const want of expected) {
    let found = -1;
    for (const i of free) {
      const got = actual[i];
      if (got.class !== want.class || got.entries.length !== want.entries.length) continue;
      const ok = want.entries.every((e) => {
        const other = entryAt(got, e.frame);
        if (!other) return false;
        const a = boxToWire(other.box);
        const b = boxToWire(e.box);
        return a.every((v, j) => Math.abs(v - b[j]) <= tol);
      });
      if (ok) {
        found = i;
        break;
      }
    }
    if (found < 0) return false;
    free.delete(found);
  }
  return true;
}

describe("UI/CLI parity", () => {
  it("propagate through the client matches the CLI run on an identical sequence", async () => {
    const session = await client.session("a");
    const result = await client.propagate("a", {
      revision: session.revision,
      startFrame: 0,
      classId: "vehicle",
      box: SEED_BOX,
    });
    expect(result.n_entries).toBe(cliPropagate.n_entries);
    expect(result.notice).toBe(cliPropagate.notice);

    const viaUi = await client.annotations("a");
    const viaCli = await client.annotations("b");
    expect(viaUi.revision).toBe(viaCli.revision);
    expect(viaUi.tracks).toEqual(viaCli.tracks); // identical stored annotations
  });

  it("an edit round-trips with only the edited fields changed", async () => {
    const before = await client.annotations("a");
    expect(before.tracks.length).toBeGreaterThan(0);
    const track = before.tracks[0];
    const frame = 10;
    const entry = entryAt(track, frame)!;
    expect(entry.source).not.toBe("manual"); // a propagated mid-track entry

    const edited: Track = {
      ...track,
      entries: track.entries.map((e) =>
        e.frame === frame
          ? { ...e, box: { ...e.box, cx: e.box.cx + 1.0 }, source: "manual" }
          : e,
      ),
    };
    const next = before.tracks.map((t) => (t.id === track.id ? edited : t));
    const put = await client.putAnnotations("a", before.revision, next);
    expect(put.revision).toBe(before.revision + 1);

    const after = await client.annotations("a");
    const expected = before.tracks.map((t) =>
      t.id === track.id
        ? {
            ...t,
            entries: t.entries.map((e) =>
              e.frame === frame
                ? { ...e, box: { ...e.box, cx: e.box.cx + 1.0 }, source: "manual" }
                : e,
            ),
          }
        : t,
    );
    expect(after.tracks).toEqual(expected); // nothing but cx and source moved
    const kept = entryAt(after.tracks.find((t) => t.id === track.id)!, frame)!;
    expect(kept.keyframe).toBe(entry.keyframe);
  });

  it("staged accept-all on a noise-free run reproduces the ground truth", async () => {
    const session = await client.session("c");
    let staged = await client.autolabel("c", session.revision);
    for (let i = 0; i < 100 && staged.status !== "done"; i++) {
      await new Promise((r) => setTimeout(r, 200));
      staged = await client.staged("c");
    }
    expect(staged.status).toBe("done");
    expect(staged.pending.length).toBeGreaterThan(0);

    await client.stagedAccept("c");
    const doc = await client.annotations("c");
    const gt = JSON.parse(readFileSync(join(proj, "sequences", "c", "gt.json"), "utf-8"));
    const gtTracks = (gt.tracks as WireTrack[]).map(trackFromWire);
    expect(doc.tracks.length).toBe(gtTracks.length);
    expect(sameAnnotations(doc.tracks, gtTracks)).toBe(true);
  });

  it("decimated point fetches are deterministic and stride-sampled", async () => {
    const full = await client.points("b", 0, 1);
    const once = await client.points("b", 0, 3);
    const twice = await client.points("b", 0, 3);
    expect(once.count).toBe(Math.ceil(full.count / 3));
    expect(Array.from(once.positions)).toEqual(Array.from(twice.positions));
    expect(Array.from(once.intensity)).toEqual(Array.from(twice.intensity));
  });

  it("ground height queries hit the fitted model", async () => {
    const z = await client.groundHeight("a", 0, 0);
    expect(Math.abs(z)).toBeLessThan(0.2); // flat synthetic ground at z = 0
  });
});
