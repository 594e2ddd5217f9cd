import { describe, expect, it } from "vitest";

import { AppState } from "../src/state";
import type { Track } from "../src/types";

function track(id: number): Track {
  return {
    id,
    class: "vehicle",
    entries: [{ frame: 0, box: { cx: 0, cy: 0, cz: 1, length: 4, width: 2, height: 1.6, yaw: 0 }, source: "manual", keyframe: true }],
  };
}

describe("AppState", () => {
  it("opening a sequence resets frame, selection, and tracks", () => {
    const st = new AppState();
    st.openSequence("a", 60, 0);
    st.setTracks([track(1)], 1);
    st.select(1);
    st.setFrame(12);
    st.openSequence("b", 30, 0);
    expect(st.state.sequenceId).toBe("b");
    expect(st.state.frame).toBe(0);
    expect(st.state.selected).toBeNull();
    expect(st.state.tracks).toEqual([]);
  });

  it("clamps the frame to the sequence bounds", () => {
    const st = new AppState();
    st.openSequence("a", 60, 0);
    st.setFrame(-5);
    expect(st.state.frame).toBe(0);
    st.setFrame(999);
    expect(st.state.frame).toBe(59);
    st.setFrame(12.6);
    expect(st.state.frame).toBe(13);
  });

  it("selection only lands on tracks that exist", () => {
    const st = new AppState();
    st.openSequence("a", 60, 0);
    st.setTracks([track(1)], 1);
    st.select(2);
    expect(st.state.selected).toBeNull();
    st.select(1);
    expect(st.state.selected).toBe(1);
    st.select(null);
    expect(st.state.selected).toBeNull();
  });

  it("drops the selection when the track disappears from a snapshot", () => {
    const st = new AppState();
    st.openSequence("a", 60, 0);
    st.setTracks([track(1), track(2)], 1);
    st.select(2);
    st.setTracks([track(1)], 2);
    expect(st.state.selected).toBeNull();
    expect(st.state.revision).toBe(2);
  });

  it("keeps the selection when the track survives", () => {
    const st = new AppState();
    st.openSequence("a", 60, 0);
    st.setTracks([track(1), track(2)], 1);
    st.select(2);
    st.setTracks([track(2)], 2);
    expect(st.state.selected).toBe(2);
    expect(st.selectedTrack()?.id).toBe(2);
  });

  it("rejects non-positive or fractional decimation", () => {
    const st = new AppState();
    st.openSequence("a", 60, 0);
    expect(() => st.setDecimate(0)).toThrow();
    expect(() => st.setDecimate(1.5)).toThrow();
    st.setDecimate(4);
    expect(st.state.decimate).toBe(4);
  });

  it("notifies subscribers on every change", () => {
    const st = new AppState();
    let n = 0;
    st.subscribe(() => n++);
    st.openSequence("a", 60, 0);
    st.setFrame(3);
    st.setMode("batch");
    expect(n).toBe(3);
  });
});
