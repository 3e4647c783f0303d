// Stroke rows travel as 8 floats in [0, 1]:
// (x_x, x_y, rho_r, rho_g, rho_b, sigma_h, sigma_w, omega)
export type StrokeRow = [number, number, number, number, number, number, number, number];

export interface Point {
  x: number; // canvas-fraction coordinates in [0, 1]
  y: number;
}

export interface Variant {
  variant_id: string;
  strokes: StrokeRow[];
  preview: string; // base64 PNG
}

export interface SessionState {
  canvas: string; // base64 PNG, server-authoritative
  history_len: number;
}

export interface InterpolationStep {
  alpha: number;
  strokes: StrokeRow[];
}

export interface BrushSettings {
  color: [number, number, number];
  minSigma: number;
}

export function isValidStroke(row: number[]): row is StrokeRow {
  return row.length === 8 && row.every((v) => Number.isFinite(v) && v >= 0 && v <= 1);
}

export const clamp01 = (v: number): number => Math.min(1, Math.max(0, v));
