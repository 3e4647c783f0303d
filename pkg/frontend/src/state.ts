import { ApiClient, ApiError } from "./api.js";
import { gestureToStroke } from "./gesture.js";
import type { BrushSettings, InterpolationStep, Point, SessionState, StrokeRow, Variant } from "./types.js";

export interface SessionView {
  sessionId: string | null;
  canvas: string | null; // always the last server-returned bitmap, never composited locally
  historyLen: number;
  variants: Variant[];
  selectedVariant: string | null;
  prefixLen: number;
  interpolation: InterpolationStep[];
  scrubIndex: number;
  lastError: string | null;
}

type Listener = (view: SessionView) => void;

// Server-authoritative session store. Mutating requests (commit / accept /
// undo) are serialized through a queue; reads may overlap.
export class SessionStore {
  view: SessionView = {
    sessionId: null,
    canvas: null,
    historyLen: 0,
    variants: [],
    selectedVariant: null,
    prefixLen: 8,
    interpolation: [],
    scrubIndex: 0,
    lastError: null,
  };

  private listeners: Listener[] = [];
  private mutationTail: Promise<unknown> = Promise.resolve();

  constructor(
    private api: ApiClient,
    public brush: BrushSettings = { color: [0.1, 0.1, 0.1], minSigma: 0.02 },
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(patch: Partial<SessionView>): void {
    this.view = { ...this.view, ...patch };
    for (const listener of this.listeners) listener(this.view);
  }

  private applyState(state: SessionState): void {
    this.emit({ canvas: state.canvas, historyLen: state.history_len, lastError: null });
  }

  // at most one in-flight mutating request
  private enqueue<T>(op: () => Promise<T>): Promise<T> {
    const next = this.mutationTail.then(op, op);
    this.mutationTail = next.catch(() => undefined);
    return next;
  }

  private sid(): string {
    if (!this.view.sessionId) throw new Error("no active session");
    return this.view.sessionId;
  }

  async createSession(imageBase64: string): Promise<string> {
    const { id } = await this.api.createSession(imageBase64);
    this.emit({ sessionId: id, variants: [], selectedVariant: null, interpolation: [] });
    await this.refresh();
    return id;
  }

  async refresh(): Promise<void> {
    this.applyState(await this.api.getState(this.sid()));
  }

  commitStrokes(strokes: StrokeRow[]): Promise<void> {
    return this.enqueue(async () => {
      const state = await this.api.commitStrokes(this.sid(), strokes);
      // any commit invalidates whatever was pending server-side
      this.emit({ variants: [], selectedVariant: null });
      this.applyState(state);
    });
  }

  drawGesture(path: Point[]): Promise<void> {
    return this.commitStrokes([gestureToStroke(path, this.brush)]);
  }

  async requestVariants(n: number): Promise<Variant[]> {
    const { variants } = await this.api.suggest(this.sid(), n);
    this.emit({ variants, selectedVariant: variants[0]?.variant_id ?? null, lastError: null });
    return variants;
  }

  selectVariant(variantId: string | null): void {
    this.emit({ selectedVariant: variantId });
  }

  setPrefixLen(len: number): void {
    this.emit({ prefixLen: len });
  }

  acceptSelected(): Promise<void> {
    const variantId = this.view.selectedVariant;
    if (!variantId) return Promise.reject(new Error("no variant selected"));
    return this.accept(variantId, this.view.prefixLen);
  }

  accept(variantId: string, prefixLen: number): Promise<void> {
    return this.enqueue(async () => {
      try {
        const state = await this.api.accept(this.sid(), variantId, prefixLen);
        this.emit({ variants: [], selectedVariant: null });
        this.applyState(state);
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          // stale variants: clear the cards and refetch against the new context
          this.emit({ variants: [], selectedVariant: null });
          await this.requestVariants(4);
          this.emit({ lastError: err.message });
          return;
        }
        throw err;
      }
    });
  }

  undo(count: number): Promise<void> {
    return this.enqueue(async () => {
      const state = await this.api.undo(this.sid(), count);
      this.emit({ variants: [], selectedVariant: null });
      this.applyState(state);
    });
  }

  // read-only: scrubbing never commits strokes
  async fetchInterpolation(steps: number): Promise<void> {
    const { sequences } = await this.api.interpolate(this.sid(), steps);
    this.emit({ interpolation: sequences, scrubIndex: 0 });
  }

  scrubTo(index: number): InterpolationStep | null {
    const bounded = Math.min(Math.max(index, 0), Math.max(this.view.interpolation.length - 1, 0));
    this.emit({ scrubIndex: bounded });
    return this.view.interpolation[bounded] ?? null;
  }

  fetchHeatmap(): Promise<Blob> {
    return this.api.heatmapPng(this.sid());
  }
}
