import type { ClassId } from "./types";

export const CLASS_COLORS: Record<ClassId, string> = {
  vehicle: "#4ea1ff",
  pedestrian: "#ffb347",
  cyclist: "#7ddc64",
  motorcycle: "#e06ef0",
  bus: "#ffd23f",
  truck: "#4fd8c4",
};

export const FLAG_COLOR = "#ff4d4d";
export const SELECT_COLOR = "#ffffff";
export const POINT_COLOR = "#9aa7b8";

export function classColor(cls: string): string {
  return CLASS_COLORS[cls as ClassId] ?? "#cccccc";
}

export function trackColor(cls: string, flagged: boolean): string {
  return flagged ? FLAG_COLOR : classColor(cls);
}
