// Client view state. The server owns the annotations; this is only what
// the panels need to agree on: which sequence/frame is on screen, what is
// selected, and the last annotation snapshot fetched from the API.

import type { Track } from "./types";

export type EditMode = "single" | "batch";

export interface ViewState {
  sequenceId: string | null;
  frameCount: number;
  frame: number;
  selected: number | null;
  mode: EditMode;
  decimate: number;
  revision: number;
  tracks: Track[];
}

type Listener = () => void;

export class AppState {
  state: ViewState = {
    sequenceId: null,
    frameCount: 0,
    frame: 0,
    selected: null,
    mode: "single",
    decimate: 1,
    revision: 0,
    tracks: [],
  };

  private listeners = new Set<Listener>();

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit() {
    for (const fn of this.listeners) fn();
  }

  openSequence(sequenceId: string, frameCount: number, revision: number) {
    if (frameCount < 0) throw new Error("frameCount must be >= 0");
    this.state.sequenceId = sequenceId;
    this.state.frameCount = frameCount;
    this.state.frame = 0;
    this.state.selected = null;
    this.state.revision = revision;
    this.state.tracks = [];
    this.emit();
  }

  setFrame(frame: number) {
    const last = Math.max(0, this.state.frameCount - 1);
    this.state.frame = Math.min(last, Math.max(0, Math.round(frame)));
    this.emit();
  }

  step(delta: number) {
    this.setFrame(this.state.frame + delta);
  }

  select(trackId: number | null) {
    if (trackId !== null && !this.state.tracks.some((t) => t.id === trackId)) {
      return;
    }
    this.state.selected = trackId;
    this.emit();
  }

  setMode(mode: EditMode) {
    this.state.mode = mode;
    this.emit();
  }

  toggleMode() {
    this.setMode(this.state.mode === "single" ? "batch" : "single");
  }

  setDecimate(k: number) {
    if (!Number.isInteger(k) || k < 1) throw new Error("decimate must be an integer >= 1");
    this.state.decimate = k;
    this.emit();
  }

  /** Replace the annotation snapshot; selection survives only if its track does. */
  setTracks(tracks: Track[], revision: number) {
    this.state.tracks = tracks;
    this.state.revision = revision;
    if (this.state.selected !== null && !tracks.some((t) => t.id === this.state.selected)) {
      this.state.selected = null;
    }
    this.emit();
  }

  track(trackId: number): Track | null {
    return this.state.tracks.find((t) => t.id === trackId) ?? null;
  }

  selectedTrack(): Track | null {
    return this.state.selected === null ? null : this.track(this.state.selected);
  }
}
