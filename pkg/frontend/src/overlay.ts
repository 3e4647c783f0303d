import type { StrokeRow } from "./types.js";

// Suggestion overlays draw stroke outlines (oval footprint) on a separate
// layer above the committed bitmap; they never touch the committed canvas.
export function drawStrokeOutlines(
  ctx: CanvasRenderingContext2D,
  strokes: StrokeRow[],
  highlight = "#ffd400",
): void {
  const w = ctx.canvas.width;
  const h = ctx.canvas.height;
  ctx.save();
  ctx.lineWidth = 1.5;
  ctx.strokeStyle = highlight;
  for (const s of strokes) {
    const [xx, xy, r, g, b, sh, sw, omega] = s;
    ctx.beginPath();
    ctx.ellipse(xx * w, xy * h, (sw * w) / 2, (sh * h) / 2, omega * Math.PI, 0, 2 * Math.PI);
    ctx.fillStyle = `rgba(${Math.round(r * 255)}, ${Math.round(g * 255)}, ${Math.round(b * 255)}, 0.35)`;
    ctx.fill();
    ctx.stroke();
  }
  ctx.restore();
}

export function clearOverlay(ctx: CanvasRenderingContext2D): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

export async function drawBase64Png(
  ctx: CanvasRenderingContext2D,
  b64: string,
  alpha = 1.0,
): Promise<void> {
  const img = new Image();
  await new Promise<void>((resolve, reject) => {
    img.onload = () => resolve();
    img.onerror = () => reject(new Error("could not decode canvas bitmap"));
    img.src = `data:image/png;base64,${b64}`;
  });
  ctx.save();
  ctx.globalAlpha = alpha;
  ctx.drawImage(img, 0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.restore();
}
