import { clamp01, isValidStroke, type BrushSettings, type Point, type StrokeRow } from "./types.js";

export const MIN_SIGMA = 0.015;

// One drag gesture maps to exactly one stroke: the model consumes discrete
// strokes, not freehand paths.
//   center = path midpoint, sigma = path bounding box, omega = principal direction
export function gestureToStroke(path: Point[], brush: BrushSettings): StrokeRow {
  if (path.length === 0) throw new Error("empty pointer path");
  const mid = path[Math.floor((path.length - 1) / 2)]!;
  let minX = Infinity,
    maxX = -Infinity,
    minY = Infinity,
    maxY = -Infinity;
  for (const p of path) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const minSigma = Math.max(brush.minSigma, MIN_SIGMA);
  const sigmaW = Math.max(maxX - minX, minSigma);
  const sigmaH = Math.max(maxY - minY, minSigma);
  const omega = principalAngle(path) / Math.PI;

  const row: number[] = [
    clamp01(mid.x),
    clamp01(mid.y),
    clamp01(brush.color[0]),
    clamp01(brush.color[1]),
    clamp01(brush.color[2]),
    clamp01(sigmaH),
    clamp01(sigmaW),
    clamp01(omega),
  ];
  if (!isValidStroke(row)) throw new Error(`gesture produced an invalid stroke: ${row}`);
  return row;
}

// First principal component of the path points, as an angle in [0, pi).
export function principalAngle(path: Point[]): number {
  if (path.length < 2) return 0;
  let mx = 0,
    my = 0;
  for (const p of path) {
    mx += p.x;
    my += p.y;
  }
  mx /= path.length;
  my /= path.length;
  let sxx = 0,
    sxy = 0,
    syy = 0;
  for (const p of path) {
    const dx = p.x - mx;
    const dy = p.y - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx === 0 && syy === 0) return 0;
  // eigenvector of the 2x2 covariance for the larger eigenvalue
  const angle = 0.5 * Math.atan2(2 * sxy, sxx - syy);
  return ((angle % Math.PI) + Math.PI) % Math.PI;
}
