// Drives the real suggestion service end to end: scripted gestures, prefix
// accepts and undos, checking the displayed bitmap stays byte-equal to the
// server state after every step.
import { type ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionStore } from "../src/state.js";
import type { Point } from "../src/types.js";

const PORT = 8791;
const BASE = `http://127.0.0.1:${PORT}`;
const PYTHON = process.env.PYTHON ?? "python3";

let server: ChildProcess | null = null;
let referenceB64 = "";

async function waitForService(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/openapi.json`);
      if (resp.ok) return;
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error(`service did not come up on ${BASE}: ${lastError}`);
}

beforeAll(async () => {
  const fixtures = mkdtempSync(join(tmpdir(), "nextstroke-ui-"));
  execFileSync(PYTHON, [join(__dirname, "..", "scripts", "make_fixture.py"), fixtures], {
    stdio: "inherit",
  });
  referenceB64 = readFileSync(join(fixtures, "reference.png")).toString("base64");
  server = spawn(
    PYTHON,
    [
      "-m",
      "nextstroke.cli",
      "serve",
      "--checkpoint",
      join(fixtures, "tiny.pt"),
      "--port",
      String(PORT),
      "--seed",
      "7",
      "--heatmap-samples",
      "4",
    ],
    { stdio: "ignore" },
  );
  await waitForService(120_000);
}, 150_000);

afterAll(() => {
  server?.kill();
});

const api = () => new ApiClient(BASE);

async function expectDisplayedEqualsServer(store: SessionStore): Promise<void> {
  const state = await api().getState(store.view.sessionId!);
  expect(store.view.canvas).toBe(state.canvas);
  expect(store.view.historyLen).toBe(state.history_len);
}

const drag = (x0: number, y0: number, x1: number, y1: number, n = 12): Point[] =>
  Array.from({ length: n }, (_, i) => ({
    x: x0 + ((x1 - x0) * i) / (n - 1),
    y: y0 + ((y1 - y0) * i) / (n - 1),
  }));

describe("painter UI against a live seeded service", () => {
  it("keeps the displayed canvas byte-equal to GET /state after each scripted action", async () => {
    const store = new SessionStore(api());
    await store.createSession(referenceB64);
    await expectDisplayedEqualsServer(store);

    for (const path of [
      drag(0.1, 0.2, 0.6, 0.25),
      drag(0.3, 0.3, 0.35, 0.8),
      [{ x: 0.7, y: 0.7 }],
    ]) {
      await store.drawGesture(path);
      await expectDisplayedEqualsServer(store);
    }

    await store.requestVariants(3);
    store.setPrefixLen(8);
    await store.acceptSelected();
    await expectDisplayedEqualsServer(store);

    await store.undo(2);
    await expectDisplayedEqualsServer(store);
  }, 60_000);

  it("prefix-slider accept changes history length by exactly the slider value", async () => {
    const store = new SessionStore(api());
    await store.createSession(referenceB64);
    await store.drawGesture(drag(0.2, 0.2, 0.5, 0.5));
    const before = store.view.historyLen;

    await store.requestVariants(2);
    store.setPrefixLen(3);
    await store.acceptSelected();
    expect(store.view.historyLen).toBe(before + 3);
    await expectDisplayedEqualsServer(store);
  }, 60_000);

  it("interpolation scrubbing never commits strokes", async () => {
    const store = new SessionStore(api());
    await store.createSession(referenceB64);
    await store.drawGesture(drag(0.4, 0.1, 0.45, 0.9));
    const before = store.view.historyLen;

    await store.fetchInterpolation(6);
    expect(store.view.interpolation).toHaveLength(6);
    expect(store.view.interpolation[0]!.alpha).toBe(0);
    expect(store.view.interpolation[5]!.alpha).toBe(1);
    for (const idx of [0, 3, 5, 2]) {
      const step = store.scrubTo(idx);
      expect(step).not.toBeNull();
      expect(step!.strokes).toHaveLength(8);
    }
    await expectDisplayedEqualsServer(store);
    expect(store.view.historyLen).toBe(before);
  }, 60_000);

  it("stale variants are rejected and the store refetches cards", async () => {
    const store = new SessionStore(api());
    await store.createSession(referenceB64);
    const variants = await store.requestVariants(2);

    // a second client moves the context forward
    const other = new SessionStore(api());
    other.view = { ...other.view, sessionId: store.view.sessionId };
    await other.drawGesture(drag(0.1, 0.1, 0.2, 0.2));

    await store.accept(variants[0]!.variant_id, 2);
    expect(store.view.lastError).not.toBeNull();
    expect(store.view.variants.length).toBeGreaterThan(0);
    await store.refresh();
    await expectDisplayedEqualsServer(store);
  }, 60_000);

  it("serves heatmaps for the current context", async () => {
    const store = new SessionStore(api());
    await store.createSession(referenceB64);
    const blob = await store.fetchHeatmap();
    const bytes = new Uint8Array(await blob.arrayBuffer());
    expect(bytes.slice(0, 4)).toEqual(new Uint8Array([0x89, 0x50, 0x4e, 0x47])); // PNG magic
  }, 60_000);
});
