// Perspective context view built on three.js. Scene construction is kept
// renderer-free so it also runs headless; only App owns a WebGLRenderer.

import * as THREE from "three";

import { SELECT_COLOR, trackColor } from "./colors";
import type { PointCloud, Track } from "./types";
import { entryAt } from "./types";

export const POINTS_NAME = "points";
export const BOXES_NAME = "boxes";

export function pointsObject(cloud: PointCloud): THREE.Points {
  const geo = new THREE.BufferGeometry();
  geo.setAttribute("position", new THREE.BufferAttribute(cloud.positions, 3));
  const colors = new Float32Array(cloud.count * 3);
  for (let i = 0; i < cloud.count; i++) {
    // intensity in [0, 1] -> gray ramp kept off pure black
    const v = 0.35 + 0.65 * Math.min(1, Math.max(0, cloud.intensity[i]));
    colors[3 * i] = v;
    colors[3 * i + 1] = v;
    colors[3 * i + 2] = v;
  }
  geo.setAttribute("color", new THREE.BufferAttribute(colors, 3));
  const mat = new THREE.PointsMaterial({ size: 0.08, vertexColors: true });
  const obj = new THREE.Points(geo, mat);
  obj.name = POINTS_NAME;
  return obj;
}

export interface SceneOptions {
  selected?: number | null;
  flagged?: Set<number>;
}

export function boxObject(
  track: Track,
  frame: number,
  opts: SceneOptions = {},
): THREE.LineSegments | null {
  const entry = entryAt(track, frame);
  if (!entry) return null;
  const b = entry.box;
  const geo = new THREE.EdgesGeometry(new THREE.BoxGeometry(b.length, b.width, b.height));
  const flagged = opts.flagged?.has(track.id) ?? false;
  const color = track.id === opts.selected ? SELECT_COLOR : trackColor(track.class, flagged);
  const mat = new THREE.LineBasicMaterial({ color });
  const obj = new THREE.LineSegments(geo, mat);
  obj.position.set(b.cx, b.cy, b.cz);
  obj.rotation.z = b.yaw;
  obj.userData.trackId = track.id;
  obj.userData.keyframe = entry.keyframe;
  // keyframes render at full strength, interpolated frames slightly faded
  mat.transparent = !entry.keyframe;
  mat.opacity = entry.keyframe ? 1.0 : 0.55;
  return obj;
}

export function annotationGroup(tracks: Track[], frame: number, opts: SceneOptions = {}): THREE.Group {
  const group = new THREE.Group();
  group.name = BOXES_NAME;
  for (const track of tracks) {
    const obj = boxObject(track, frame, opts);
    if (obj) group.add(obj);
  }
  return group;
}

function disposeTree(root: THREE.Object3D) {
  root.traverse((obj) => {
    const mesh = obj as Partial<THREE.Mesh>;
    if (mesh.geometry) mesh.geometry.dispose();
    const mat = mesh.material;
    if (mat) (Array.isArray(mat) ? mat : [mat]).forEach((m) => m.dispose());
  });
}

/** Swap in this frame's points and boxes, disposing what they replace. */
export function syncScene(
  scene: THREE.Scene,
  cloud: PointCloud | null,
  tracks: Track[],
  frame: number,
  opts: SceneOptions = {},
) {
  for (const name of [POINTS_NAME, BOXES_NAME]) {
    const old = scene.getObjectByName(name);
    if (old) {
      scene.remove(old);
      disposeTree(old);
    }
  }
  if (cloud) scene.add(pointsObject(cloud));
  scene.add(annotationGroup(tracks, frame, opts));
}
