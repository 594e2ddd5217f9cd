// Annotation workbench wiring: DOM layout, pointer gestures, keyboard
// bindings, and the fetch/commit loop against the annotation service.
// The server stays authoritative: every mutation is a client call carrying
// the expected revision, and the UI re-syncs from the response.

import * as THREE from "three";

import { ApiClient, ConflictError } from "./api";
import type { Gesture } from "./boxes";
import { applyGesture, editEntry, hitTest } from "./boxes";
import type { BevCamera, Ctx2D } from "./bev";
import { drawFrame, screenToWorld } from "./bev";
import { classColor } from "./colors";
import type { EditMode } from "./state";
import { AppState } from "./state";
import { cursorPct, frameFromOffset, timelineTicks } from "./timeline";
import type { ReviewItem } from "./review";
import { acceptAll, acceptOne, flaggedIds, flipTrack, rejectOne, reviewQueue } from "./review";
import type { Box7, PointCloud, SequenceInfo, StagedDoc, Track } from "./types";
import { CLASSES, cloneTrack, entryAt } from "./types";
import { syncScene } from "./view3d";

// default footprints for freshly drawn boxes, meters
const CLASS_DIMS: Record<string, [number, number, number]> = {
  vehicle: [4.2, 1.9, 1.6],
  pedestrian: [0.7, 0.7, 1.7],
  cyclist: [1.8, 0.6, 1.7],
  motorcycle: [2.0, 0.8, 1.4],
  bus: [11.0, 2.9, 3.2],
  truck: [8.0, 2.6, 3.0],
};

type DragKind = "move" | "rotate" | "resize" | "pan";

interface DragContext {
  kind: DragKind;
  trackId: number | null;
  startX: number;
  startY: number;
  lastX: number;
  lastY: number;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function message(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export class App {
  readonly state = new AppState();
  readonly client: ApiClient;

  // last successfully fetched cloud; kept on fetch failure
  cloud: PointCloud | null = null;
  cloudFrame = -1;
  staged: StagedDoc | null = null;
  pendingBox: Box7 | null = null;
  sequences = new Map<string, SequenceInfo>();

  bevCam: BevCamera = { cx: 0, cy: 0, scale: 6 };
  private drag: DragContext | null = null;
  private dragGesture: Gesture | null = null;

  private scene = new THREE.Scene();
  private camera = new THREE.PerspectiveCamera(60, 4 / 3, 0.1, 2000);
  private orbit = { azimuth: -Math.PI / 4, elevation: 0.9, radius: 70 };
  private renderer: THREE.WebGLRenderer | null = null;

  // DOM
  private banner!: HTMLDivElement;
  private seqSelect!: HTMLSelectElement;
  private classSelect!: HTMLSelectElement;
  private decimateSelect!: HTMLSelectElement;
  private modeButton!: HTMLButtonElement;
  private statusLine!: HTMLDivElement;
  private bevCanvas!: HTMLCanvasElement;
  private glCanvas!: HTMLCanvasElement;
  private trackList!: HTMLDivElement;
  private reviewList!: HTMLDivElement;
  private timelineBar!: HTMLDivElement;

  constructor(root: HTMLElement, client: ApiClient) {
    this.client = client;
    this.buildDom(root);
    this.bindKeys();
    this.state.subscribe(() => this.render());
  }

  private get sid(): string {
    const sid = this.state.state.sequenceId;
    if (!sid) throw new Error("no sequence open");
    return sid;
  }

  // ---- DOM ----------------------------------------------------------

  private buildDom(root: HTMLElement) {
    root.innerHTML = "";
    const toolbar = el("div", "toolbar");

    this.seqSelect = el("select", "seq-select");
    this.seqSelect.addEventListener("change", () => {
      void this.openSequence(this.seqSelect.value);
    });

    const prev = el("button", "", "< prev");
    prev.addEventListener("click", () => void this.showFrame(this.state.state.frame - 1));
    const next = el("button", "", "next >");
    next.addEventListener("click", () => void this.showFrame(this.state.state.frame + 1));

    this.modeButton = el("button", "mode-button", "mode: single");
    this.modeButton.addEventListener("click", () => this.setMode(this.state.state.mode === "single" ? "batch" : "single"));

    this.classSelect = el("select", "class-select");
    for (const cls of CLASSES) {
      const opt = el("option", "", cls);
      opt.value = cls;
      this.classSelect.appendChild(opt);
    }

    this.decimateSelect = el("select", "decimate-select");
    for (const k of [1, 2, 4, 8]) {
      const opt = el("option", "", `1/${k} pts`);
      opt.value = String(k);
      this.decimateSelect.appendChild(opt);
    }
    this.decimateSelect.addEventListener("change", () => {
      void this.setDecimate(Number(this.decimateSelect.value));
    });

    const propagateBtn = el("button", "", "propagate (g)");
    propagateBtn.addEventListener("click", () => void this.propagate());
    const flipBtn = el("button", "", "flip (f)");
    flipBtn.addEventListener("click", () => void this.flipSelected());
    const undoBtn = el("button", "", "undo (u)");
    undoBtn.addEventListener("click", () => void this.undo());
    const autolabelBtn = el("button", "", "auto-label");
    autolabelBtn.addEventListener("click", () => void this.runAutolabel());

    this.banner = el("div", "banner hidden");
    this.banner.addEventListener("click", () => this.banner.classList.add("hidden"));

    toolbar.append(
      this.seqSelect, prev, next, this.modeButton, this.classSelect,
      this.decimateSelect, propagateBtn, flipBtn, undoBtn, autolabelBtn,
    );

    const main = el("div", "main");
    const viewport = el("div", "viewport");
    this.glCanvas = el("canvas", "gl-canvas");
    this.bevCanvas = el("canvas", "bev-canvas");
    viewport.append(this.glCanvas, this.bevCanvas);

    const side = el("div", "side");
    side.appendChild(el("div", "side-title", "tracks"));
    this.trackList = el("div", "track-list");
    side.appendChild(this.trackList);
    side.appendChild(el("div", "side-title", "staged review"));
    const acceptAllBtn = el("button", "accept-all", "accept all (a)");
    acceptAllBtn.addEventListener("click", () => void this.acceptAllStaged());
    side.appendChild(acceptAllBtn);
    this.reviewList = el("div", "review-list");
    side.appendChild(this.reviewList);

    main.append(viewport, side);

    this.timelineBar = el("div", "timeline");
    this.timelineBar.addEventListener("click", (ev) => {
      const rect = this.timelineBar.getBoundingClientRect();
      if (rect.width <= 0) return;
      const frame = frameFromOffset((ev.clientX - rect.left) / rect.width, this.state.state.frameCount);
      void this.showFrame(frame);
    });

    this.statusLine = el("div", "status");

    root.append(toolbar, this.banner, main, this.timelineBar, this.statusLine);

    this.sizeCanvases();
    try {
      this.renderer = new THREE.WebGLRenderer({ canvas: this.glCanvas, antialias: true });
    } catch {
      this.renderer = null; // headless or WebGL-less environment: BEV still works
    }
    this.bindBevPointer();
    this.bindOrbitPointer();
  }

  private sizeCanvases() {
    const w = this.glCanvas.clientWidth || 640;
    const h = this.glCanvas.clientHeight || 480;
    this.glCanvas.width = w;
    this.glCanvas.height = h;
    const bw = this.bevCanvas.clientWidth || 640;
    const bh = this.bevCanvas.clientHeight || 480;
    this.bevCanvas.width = bw;
    this.bevCanvas.height = bh;
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
  }

  // ---- data flow -----------------------------------------------------

  async start() {
    const infos = await this.client.listSequences();
    this.sequences = new Map(infos.map((i) => [i.id, i]));
    this.seqSelect.innerHTML = "";
    for (const info of infos) {
      const opt = el("option", "", `${info.id} (${info.frame_count} frames)`);
      opt.value = info.id;
      this.seqSelect.appendChild(opt);
    }
    if (infos.length) await this.openSequence(infos[0].id);
  }

  async openSequence(sid: string) {
    const info = this.sequences.get(sid);
    if (!info) {
      this.showBanner(`unknown sequence ${sid}`);
      return;
    }
    const session = await this.client.session(sid);
    this.state.openSequence(sid, info.frame_count, session.revision);
    this.cloud = null;
    this.cloudFrame = -1;
    this.pendingBox = null;
    this.seqSelect.value = sid;
    await this.refreshAnnotations();
    await this.refreshStaged();
    await this.showFrame(0);
  }

  /** Seek; on a failed point fetch the banner shows and the last good cloud stays. */
  async showFrame(frame: number) {
    this.state.setFrame(frame);
    const t = this.state.state.frame;
    try {
      const cloud = await this.client.points(this.sid, t, this.state.state.decimate);
      this.cloud = cloud;
      this.cloudFrame = t;
    } catch (err) {
      this.showBanner(`frame ${t}: ${message(err)}`);
    }
    this.render();
  }

  async setDecimate(k: number) {
    this.state.setDecimate(k);
    this.decimateSelect.value = String(k);
    await this.showFrame(this.state.state.frame); // re-request at the new stride
  }

  setMode(mode: EditMode) {
    this.state.setMode(mode);
    this.modeButton.textContent = `mode: ${mode}`;
  }

  async refreshAnnotations() {
    const doc = await this.client.annotations(this.sid);
    this.state.setTracks(doc.tracks, doc.revision);
  }

  async refreshStaged() {
    try {
      this.staged = await this.client.staged(this.sid);
    } catch (err) {
      this.staged = null;
      this.showBanner(message(err));
    }
    this.render();
  }

  // ---- edits ----------------------------------------------------------

  /**
   * One box edit: optimistic local apply, PUT with the expected revision,
   * one silent replay on conflict, then surface and re-sync if the replay
   * conflicts as well. Batch mode promotes the entry to keyframe and
   * re-interpolates the track between keyframes.
   */
  async commitEdit(trackId: number, frame: number, gesture: Gesture): Promise<boolean> {
    const sid = this.sid;
    const current = this.state.track(trackId);
    if (!current || !entryAt(current, frame)) return false;
    const mode = this.state.state.mode;
    const baseTracks = this.state.state.tracks;
    const baseRevision = this.state.state.revision;

    const optimistic = editEntry(current, frame, gesture, mode);
    this.state.setTracks(
      baseTracks.map((t) => (t.id === trackId ? optimistic.track : t)),
      baseRevision,
    );

    const attempt = async (tracks: Track[], revision: number) => {
      const target = tracks.find((t) => t.id === trackId);
      if (!target || !entryAt(target, frame)) {
        throw new Error(`track ${trackId} no longer has frame ${frame}`);
      }
      const edit = editEntry(target, frame, gesture, mode);
      const next = tracks.map((t) => (t.id === trackId ? edit.track : t));
      const resp = await this.client.putAnnotations(sid, revision, next);
      return { tracks: next, revision: resp.revision, promoted: edit.promoted };
    };

    let result;
    try {
      result = await attempt(baseTracks, baseRevision);
    } catch (err) {
      if (!(err instanceof ConflictError)) {
        this.showBanner(message(err));
        await this.refreshAnnotations();
        return false;
      }
      const fresh = await this.client.annotations(sid);
      try {
        result = await attempt(fresh.tracks, fresh.revision); // replay on fresh state
      } catch (err2) {
        this.state.setTracks(fresh.tracks, fresh.revision);
        this.showBanner(`concurrent edit on ${sid}: ${message(err2)}; annotations reloaded`);
        return false;
      }
    }

    this.state.setTracks(result.tracks, result.revision);
    if (result.promoted) {
      const resp = await this.client.interpolate(sid, trackId, result.revision);
      void resp;
      await this.refreshAnnotations();
    }
    return true;
  }

  /** Draw a fresh box at a BEV point; z snaps to the ground model when present. */
  async createPendingBox(x: number, y: number) {
    const cls = this.classSelect.value || "vehicle";
    const [length, width, height] = CLASS_DIMS[cls] ?? CLASS_DIMS.vehicle;
    let ground = 0;
    try {
      ground = await this.client.groundHeight(this.sid, x, y);
    } catch {
      ground = 0; // no fitted ground model: keep the scene floor
    }
    this.pendingBox = { cx: x, cy: y, cz: ground + height / 2, length, width, height, yaw: 0 };
    this.render();
  }

  /** Commit the pending box as a new single-entry manual track. */
  async commitPendingBox(): Promise<number | null> {
    if (!this.pendingBox) return null;
    const st = this.state.state;
    const nextId = st.tracks.reduce((m, t) => Math.max(m, t.id), 0) + 1;
    const track: Track = {
      id: nextId,
      class: this.classSelect.value || "vehicle",
      entries: [{ frame: st.frame, box: { ...this.pendingBox }, source: "manual", keyframe: true }],
    };
    const tracks = [...st.tracks.map(cloneTrack), track];
    try {
      const resp = await this.client.putAnnotations(this.sid, st.revision, tracks);
      this.pendingBox = null;
      this.state.setTracks(tracks, resp.revision);
      this.state.select(nextId);
      return nextId;
    } catch (err) {
      this.showBanner(message(err));
      return null;
    }
  }

  /**
   * Propagate: a drawn pending box seeds a new track from this frame; with
   * a selected track that ends earlier, its last box is carried to this
   * frame and the track is extended instead.
   */
  async propagate(n?: number) {
    const st = this.state.state;
    const sid = this.sid;
    try {
      if (this.pendingBox) {
        const result = await this.client.propagate(sid, {
          revision: st.revision,
          startFrame: st.frame,
          classId: this.classSelect.value || "vehicle",
          box: { ...this.pendingBox },
          n,
        });
        this.pendingBox = null;
        await this.refreshAnnotations();
        this.state.select(result.track_id);
        if (result.notice) this.showBanner(`propagate: ${result.notice}`);
        return;
      }
      const track = this.state.selectedTrack();
      if (track && track.entries.length) {
        const last = track.entries[track.entries.length - 1];
        if (last.frame >= st.frame) {
          this.showBanner(`track ${track.id} already reaches frame ${last.frame}; seek past it to extend`);
          return;
        }
        const result = await this.client.propagate(sid, {
          revision: st.revision,
          startFrame: st.frame,
          classId: track.class,
          box: { ...last.box },
          n,
          trackId: track.id,
        });
        await this.refreshAnnotations();
        this.state.select(result.track_id);
        if (result.notice) this.showBanner(`propagate: ${result.notice}`);
        return;
      }
      this.showBanner("draw a box (double-click) or select a finished track to propagate");
    } catch (err) {
      this.showBanner(`propagate failed: ${message(err)}`);
      await this.refreshAnnotations();
    }
  }

  /** One-click orientation fix across the whole selected tracklet. */
  async flipSelected() {
    const track = this.state.selectedTrack();
    if (!track) {
      this.showBanner("select a track to flip");
      return;
    }
    try {
      await flipTrack(this.client, this.sid, track, this.state.state.revision);
      await this.refreshAnnotations();
    } catch (err) {
      this.showBanner(`flip failed: ${message(err)}`);
      await this.refreshAnnotations();
    }
  }

  async undo() {
    try {
      await this.client.undo(this.sid, this.state.state.revision);
      await this.refreshAnnotations();
      await this.refreshStaged();
    } catch (err) {
      this.showBanner(`undo failed: ${message(err)}`);
    }
  }

  async runAutolabel() {
    try {
      this.staged = await this.client.autolabel(this.sid, this.state.state.revision);
      await this.refreshAnnotations();
      this.render();
    } catch (err) {
      this.showBanner(`auto-label failed: ${message(err)}`);
    }
  }

  async acceptAllStaged() {
    try {
      this.staged = await acceptAll(this.client, this.sid);
      this.render();
    } catch (err) {
      this.showBanner(message(err));
    }
  }

  async acceptStaged(trackId: number) {
    this.staged = await acceptOne(this.client, this.sid, trackId);
    this.render();
  }

  async rejectStaged(trackId: number) {
    try {
      this.staged = await rejectOne(this.client, this.sid, this.state.state.revision, trackId);
      await this.refreshAnnotations();
    } catch (err) {
      this.showBanner(`reject failed: ${message(err)}`);
      await this.refreshAnnotations();
    }
  }

  // ---- pointer gestures ------------------------------------------------

  private bevPoint(ev: { offsetX: number; offsetY: number }): [number, number] {
    return screenToWorld(
      this.bevCam,
      this.bevCanvas.width,
      this.bevCanvas.height,
      ev.offsetX,
      ev.offsetY,
    );
  }

  private bindBevPointer() {
    this.bevCanvas.addEventListener("pointerdown", (ev) => {
      const [x, y] = this.bevPoint(ev);
      const hit = hitTest(this.state.state.tracks, this.state.state.frame, x, y);
      if (hit) {
        this.state.select(hit.trackId);
        const kind: DragKind = ev.shiftKey ? "rotate" : ev.altKey ? "resize" : "move";
        this.beginDrag(kind, hit.trackId, x, y);
      } else {
        this.state.select(null);
        this.beginDrag("pan", null, x, y);
      }
      this.bevCanvas.setPointerCapture?.(ev.pointerId);
    });
    this.bevCanvas.addEventListener("pointermove", (ev) => {
      if (!this.drag) return;
      const [x, y] = this.bevPoint(ev);
      this.dragTo(x, y);
    });
    this.bevCanvas.addEventListener("pointerup", () => void this.endDrag());
    this.bevCanvas.addEventListener("dblclick", (ev) => {
      const [x, y] = this.bevPoint(ev);
      const hit = hitTest(this.state.state.tracks, this.state.state.frame, x, y);
      if (!hit) void this.createPendingBox(x, y);
    });
    this.bevCanvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
      this.bevCam.scale = Math.min(80, Math.max(0.5, this.bevCam.scale * factor));
      this.render();
    });
  }

  /** Start a gesture at a world point. Exposed for tests and for events. */
  beginDrag(kind: DragKind, trackId: number | null, x: number, y: number) {
    this.drag = { kind, trackId, startX: x, startY: y, lastX: x, lastY: y };
    this.dragGesture = null;
  }

  dragTo(x: number, y: number) {
    const d = this.drag;
    if (!d) return;
    if (d.kind === "pan") {
      this.bevCam.cx -= x - d.lastX;
      this.bevCam.cy -= y - d.lastY;
      // world coords shift under the camera; keep the anchor stable
      d.lastX = x - (x - d.lastX);
      d.lastY = y - (y - d.lastY);
      this.render();
      return;
    }
    const track = d.trackId === null ? null : this.state.track(d.trackId);
    const entry = track ? entryAt(track, this.state.state.frame) : null;
    if (!track || !entry) return;
    if (d.kind === "move") {
      this.dragGesture = { kind: "move", dx: x - d.startX, dy: y - d.startY };
    } else if (d.kind === "rotate") {
      const a0 = Math.atan2(d.startY - entry.box.cy, d.startX - entry.box.cx);
      const a1 = Math.atan2(y - entry.box.cy, x - entry.box.cx);
      this.dragGesture = { kind: "rotate", dyaw: a1 - a0 };
    } else {
      // resize: pointer delta in the box frame scales the footprint
      const c = Math.cos(-entry.box.yaw);
      const s = Math.sin(-entry.box.yaw);
      const dx = x - d.startX;
      const dy = y - d.startY;
      this.dragGesture = {
        kind: "resize",
        dl: 2 * (c * dx - s * dy),
        dw: 2 * (s * dx + c * dy),
      };
    }
    d.lastX = x;
    d.lastY = y;
    this.render();
  }

  async endDrag() {
    const d = this.drag;
    const gesture = this.dragGesture;
    this.drag = null;
    this.dragGesture = null;
    if (!d || !gesture || d.trackId === null) {
      this.render();
      return;
    }
    await this.commitEdit(d.trackId, this.state.state.frame, gesture);
  }

  private bindOrbitPointer() {
    let dragging = false;
    let px = 0;
    let py = 0;
    this.glCanvas.addEventListener("pointerdown", (ev) => {
      dragging = true;
      px = ev.clientX;
      py = ev.clientY;
    });
    this.glCanvas.addEventListener("pointermove", (ev) => {
      if (!dragging) return;
      this.orbit.azimuth -= (ev.clientX - px) * 0.005;
      this.orbit.elevation = Math.min(1.5, Math.max(0.05, this.orbit.elevation + (ev.clientY - py) * 0.005));
      px = ev.clientX;
      py = ev.clientY;
      this.render();
    });
    this.glCanvas.addEventListener("pointerup", () => {
      dragging = false;
    });
    this.glCanvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const factor = ev.deltaY < 0 ? 0.9 : 1.1;
      this.orbit.radius = Math.min(400, Math.max(5, this.orbit.radius * factor));
      this.render();
    });
  }

  // ---- keyboard ---------------------------------------------------------

  private bindKeys() {
    window.addEventListener("keydown", (ev) => {
      const target = ev.target as HTMLElement | null;
      if (target && ["INPUT", "SELECT", "TEXTAREA"].includes(target.tagName)) return;
      if (!this.state.state.sequenceId) return;
      switch (ev.key) {
        case "ArrowRight":
        case "n":
          void this.showFrame(this.state.state.frame + 1);
          break;
        case "ArrowLeft":
        case "p":
          void this.showFrame(this.state.state.frame - 1);
          break;
        case "g":
          void this.propagate();
          break;
        case "f":
          void this.flipSelected();
          break;
        case "b":
          this.setMode(this.state.state.mode === "single" ? "batch" : "single");
          break;
        case "u":
          void this.undo();
          break;
        case "a":
          void this.acceptAllStaged();
          break;
        case "Enter":
          void this.commitPendingBox();
          break;
        case "Escape":
          this.pendingBox = null;
          this.state.select(null);
          break;
        default:
          return;
      }
      ev.preventDefault();
    });
  }

  // ---- rendering ---------------------------------------------------------

  showBanner(text: string) {
    this.banner.textContent = text;
    this.banner.classList.remove("hidden");
  }

  hideBanner() {
    this.banner.classList.add("hidden");
  }

  bannerVisible(): boolean {
    return !this.banner.classList.contains("hidden");
  }

  /** Tracks with the live drag preview applied, for painting only. */
  private previewTracks(): Track[] {
    const d = this.drag;
    const g = this.dragGesture;
    if (!d || !g || d.trackId === null) return this.state.state.tracks;
    return this.state.state.tracks.map((t) => {
      if (t.id !== d.trackId) return t;
      const entries = t.entries.map((e) =>
        e.frame === this.state.state.frame ? { ...e, box: applyGesture(e.box, g) } : e,
      );
      return { ...t, entries };
    });
  }

  render() {
    const st = this.state.state;
    const tracks = this.previewTracks();
    const flagged = this.staged ? flaggedIds(this.staged) : new Set<number>();

    const ctx = this.bevCanvas.getContext("2d") as Ctx2D | null;
    if (ctx) {
      drawFrame(ctx, this.bevCam, this.cloud, tracks, st.frame, {
        selected: st.selected,
        flagged,
        pendingBox: this.pendingBox,
      });
    }

    if (this.renderer) {
      syncScene(this.scene, this.cloud, tracks, st.frame, { selected: st.selected, flagged });
      const o = this.orbit;
      this.camera.position.set(
        o.radius * Math.cos(o.elevation) * Math.cos(o.azimuth),
        o.radius * Math.cos(o.elevation) * Math.sin(o.azimuth),
        o.radius * Math.sin(o.elevation),
      );
      this.camera.up.set(0, 0, 1);
      this.camera.lookAt(0, 0, 0);
      this.renderer.render(this.scene, this.camera);
    }

    this.renderSidePanel(flagged);
    this.renderTimeline();
    this.statusLine.textContent = st.sequenceId
      ? `${st.sequenceId}  frame ${st.frame + 1}/${st.frameCount}  rev ${st.revision}` +
        `  mode ${st.mode}  ${st.selected !== null ? `track ${st.selected}` : "no selection"}`
      : "no sequence";
  }

  private renderSidePanel(flagged: Set<number>) {
    this.trackList.innerHTML = "";
    for (const track of this.state.state.tracks) {
      const row = el("div", "track-row" + (track.id === this.state.state.selected ? " selected" : ""));
      const chip = el("span", "chip");
      chip.style.background = classColor(track.class);
      row.append(chip, el("span", "", `#${track.id} ${track.class} (${track.entries.length})`));
      if (flagged.has(track.id)) row.appendChild(el("span", "flag", "flagged"));
      row.addEventListener("click", () => this.state.select(track.id));
      this.trackList.appendChild(row);
    }

    this.reviewList.innerHTML = "";
    if (!this.staged) return;
    for (const item of reviewQueue(this.staged, this.state.state.tracks)) {
      this.reviewList.appendChild(this.reviewRow(item));
    }
  }

  private reviewRow(item: ReviewItem): HTMLDivElement {
    const row = el("div", "review-row" + (item.flagged ? " flagged" : ""));
    const label = item.class ?? "?";
    row.appendChild(
      el("span", "", `#${item.trackId} ${label}` + (item.reason ? ` [${item.reason}]` : "")),
    );
    const accept = el("button", "", "accept");
    accept.addEventListener("click", () => void this.acceptStaged(item.trackId));
    const reject = el("button", "", "reject");
    reject.addEventListener("click", () => void this.rejectStaged(item.trackId));
    const flip = el("button", "", "flip");
    flip.addEventListener("click", () => {
      const track = this.state.track(item.trackId);
      if (track) {
        void flipTrack(this.client, this.sid, track, this.state.state.revision)
          .then(() => this.refreshAnnotations())
          .catch((err) => this.showBanner(`flip failed: ${message(err)}`));
      }
    });
    row.append(accept, reject, flip);
    row.addEventListener("click", () => this.state.select(item.trackId));
    return row;
  }

  private renderTimeline() {
    const st = this.state.state;
    this.timelineBar.innerHTML = "";
    const track = this.state.selectedTrack();
    for (const tick of timelineTicks(track, st.frameCount)) {
      const node = el("div", "tick" + (tick.keyframe ? " keyframe" : ""));
      node.style.left = `${tick.pct}%`;
      node.title = `frame ${tick.frame} (${tick.source}${tick.keyframe ? ", keyframe" : ""})`;
      this.timelineBar.appendChild(node);
    }
    const cursor = el("div", "cursor");
    cursor.style.left = `${cursorPct(st.frame, st.frameCount)}%`;
    this.timelineBar.appendChild(cursor);
  }
}
