import type { InterpolationStep, SessionState, StrokeRow, Variant } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public fields: string[] = [],
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = `${resp.status} ${resp.statusText}`;
  let fields: string[] = [];
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
    if (Array.isArray(body.fields)) fields = body.fields;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(resp.status, detail, fields);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  createSession(imageBase64: string): Promise<{ id: string }> {
    return this.post("/sessions", { image: imageBase64 });
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.request(`/sessions/${sessionId}/state`);
  }

  commitStrokes(sessionId: string, strokes: StrokeRow[]): Promise<SessionState> {
    return this.post(`/sessions/${sessionId}/strokes`, { strokes });
  }

  suggest(sessionId: string, nVariants: number): Promise<{ variants: Variant[] }> {
    return this.post(`/sessions/${sessionId}/suggest`, { n_variants: nVariants });
  }

  accept(sessionId: string, variantId: string, prefixLen: number): Promise<SessionState> {
    return this.post(`/sessions/${sessionId}/accept`, {
      variant_id: variantId,
      prefix_len: prefixLen,
    });
  }

  undo(sessionId: string, count: number): Promise<SessionState> {
    return this.post(`/sessions/${sessionId}/undo`, { count });
  }

  interpolate(sessionId: string, steps: number): Promise<{ sequences: InterpolationStep[] }> {
    return this.post(`/sessions/${sessionId}/interpolate`, { steps });
  }

  async heatmapPng(sessionId: string): Promise<Blob> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/heatmap`);
    if (!resp.ok) throw await parseError(resp);
    return await resp.blob();
  }
}
