import { ApiClient } from "./api.js";
import { SessionStore } from "./state.js";
import { clearOverlay, drawBase64Png, drawStrokeOutlines } from "./overlay.js";
import type { Point, StrokeRow } from "./types.js";

const SERVICE_URL = new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8000";
const store = new SessionStore(new ApiClient(SERVICE_URL));

// -- layout -------------------------------------------------------------------

const root = document.createElement("div");
root.className = "app";
document.body.append(root);

const title = document.createElement("h1");
title.textContent = "Painting assistant";
root.append(title);

const stage = document.createElement("div");
stage.className = "stage";
root.append(stage);

const canvasEl = document.createElement("canvas");
canvasEl.width = 512;
canvasEl.height = 512;
canvasEl.className = "painting";
stage.append(canvasEl);

const overlayEl = document.createElement("canvas");
overlayEl.width = 512;
overlayEl.height = 512;
overlayEl.className = "overlay";
stage.append(overlayEl);

const paintingCtx = canvasEl.getContext("2d")!;
const overlayCtx = overlayEl.getContext("2d")!;

const controls = document.createElement("div");
controls.className = "controls";
root.append(controls);

const cards = document.createElement("div");
cards.className = "cards";
root.append(cards);

const status = document.createElement("p");
status.className = "status";
root.append(status);

function button(label: string, onClick: () => void): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = label;
  b.onclick = onClick;
  controls.append(b);
  return b;
}

// -- brush controls -------------------------------------------------------------

const colorInput = document.createElement("input");
colorInput.type = "color";
colorInput.value = "#202020";
colorInput.oninput = () => {
  const v = colorInput.value;
  store.brush.color = [
    parseInt(v.slice(1, 3), 16) / 255,
    parseInt(v.slice(3, 5), 16) / 255,
    parseInt(v.slice(5, 7), 16) / 255,
  ];
};
controls.append(colorInput);

const filePicker = document.createElement("input");
filePicker.type = "file";
filePicker.accept = "image/png,image/jpeg";
controls.append(filePicker);

filePicker.onchange = async () => {
  const file = filePicker.files?.[0];
  if (!file) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  for (const byte of bytes) binary += String.fromCharCode(byte);
  await store.createSession(btoa(binary));
  status.textContent = `session ${store.view.sessionId}`;
};

// -- pointer gestures -----------------------------------------------------------

let path: Point[] = [];
let drawing = false;

const toFraction = (ev: PointerEvent): Point => {
  const rect = overlayEl.getBoundingClientRect();
  return {
    x: (ev.clientX - rect.left) / rect.width,
    y: (ev.clientY - rect.top) / rect.height,
  };
};

overlayEl.onpointerdown = (ev) => {
  if (!store.view.sessionId) return;
  drawing = true;
  path = [toFraction(ev)];
  overlayEl.setPointerCapture(ev.pointerId);
};
overlayEl.onpointermove = (ev) => {
  if (drawing) path.push(toFraction(ev));
};
overlayEl.onpointerup = async () => {
  if (!drawing) return;
  drawing = false;
  try {
    await store.drawGesture(path);
  } catch (err) {
    status.textContent = String(err);
  }
  path = [];
};

// -- suggestion cards -------------------------------------------------------------

const prefixSlider = document.createElement("input");
prefixSlider.type = "range";
prefixSlider.min = "1";
prefixSlider.max = "8";
prefixSlider.value = "8";
prefixSlider.oninput = () => store.setPrefixLen(Number(prefixSlider.value));

button("Suggest", async () => {
  try {
    await store.requestVariants(4);
  } catch (err) {
    status.textContent = String(err);
  }
});
controls.append(prefixSlider);
button("Accept", async () => {
  try {
    await store.acceptSelected();
  } catch (err) {
    status.textContent = String(err);
  }
});
button("Undo", () => void store.undo(1).catch((err) => (status.textContent = String(err))));

function renderCards(): void {
  cards.replaceChildren();
  for (const variant of store.view.variants) {
    const card = document.createElement("div");
    card.className = "card" + (variant.variant_id === store.view.selectedVariant ? " selected" : "");
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${variant.preview}`;
    card.append(img);
    card.onclick = () => store.selectVariant(variant.variant_id);
    card.onpointerenter = () => {
      clearOverlay(overlayCtx);
      drawStrokeOutlines(overlayCtx, variant.strokes);
    };
    card.onpointerleave = () => clearOverlay(overlayCtx);
    cards.append(card);
  }
}

// -- heatmap and interpolation overlays -------------------------------------------

button("Heatmap", async () => {
  const blob = await store.fetchHeatmap();
  const bitmap = await createImageBitmap(blob);
  clearOverlay(overlayCtx);
  overlayCtx.save();
  overlayCtx.globalAlpha = 0.6;
  overlayCtx.drawImage(bitmap, 0, 0, overlayEl.width, overlayEl.height);
  overlayCtx.restore();
});

const scrubber = document.createElement("input");
scrubber.type = "range";
scrubber.min = "0";
scrubber.value = "0";
scrubber.oninput = () => {
  const step = store.scrubTo(Number(scrubber.value));
  clearOverlay(overlayCtx);
  if (step) drawStrokeOutlines(overlayCtx, step.strokes as StrokeRow[], "#27c5f0");
};
button("Interpolate", async () => {
  await store.fetchInterpolation(8);
  scrubber.max = String(store.view.interpolation.length - 1);
  scrubber.value = "0";
  scrubber.dispatchEvent(new Event("input"));
});
controls.append(scrubber);

// -- server-authoritative redraw ---------------------------------------------------

store.subscribe((view) => {
  if (view.canvas) void drawBase64Png(paintingCtx, view.canvas);
  renderCards();
  status.textContent = view.lastError
    ? `error: ${view.lastError}`
    : `strokes committed: ${view.historyLen}`;
});
