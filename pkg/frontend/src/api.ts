/** Typed client for the curation service HTTP API. */

import type { FieldError, FrameRecord, PredictionsPayload, QueueEntry } from "./types.js";

export type SaveResult =
  | { ok: true; revision: string }
  | { ok: false; kind: "conflict"; current: string }
  | { ok: false; kind: "invalid"; errors: FieldError[] }
  | { ok: false; kind: "error"; message: string };

export interface AnnotationsResponse {
  record: FrameRecord;
  revision: string;
}

/** Abstract surface the editor uses; the tests provide an in-memory fake. */
export interface EditorApi {
  getQueue(): Promise<QueueEntry[]>;
  getAnnotations(frameId: string): Promise<AnnotationsResponse>;
  putAnnotations(frameId: string, record: FrameRecord, revision: string | null): Promise<SaveResult>;
  getPredictions(frameId: string): Promise<PredictionsPayload>;
  imageUrl(frameId: string): string;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class HttpApi implements EditorApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async getQueue(): Promise<QueueEntry[]> {
    const resp = await this.fetchFn(this.url("/api/queue?order=loss_desc"));
    if (!resp.ok) throw new Error(`queue fetch failed: ${resp.status}`);
    return (await resp.json()) as QueueEntry[];
  }

  async getAnnotations(frameId: string): Promise<AnnotationsResponse> {
    const resp = await this.fetchFn(this.url(`/api/frames/${frameId}/annotations`));
    if (!resp.ok) throw new Error(`annotations fetch failed: ${resp.status}`);
    const record = (await resp.json()) as FrameRecord;
    return { record, revision: resp.headers.get("ETag") ?? "0" };
  }

  async putAnnotations(
    frameId: string,
    record: FrameRecord,
    revision: string | null,
  ): Promise<SaveResult> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (revision !== null) headers["If-Match"] = revision;
    const resp = await this.fetchFn(this.url(`/api/frames/${frameId}/annotations`), {
      method: "PUT",
      headers,
      body: JSON.stringify(record),
    });
    if (resp.status === 409) {
      return { ok: false, kind: "conflict", current: await textDetail(resp) };
    }
    if (resp.status === 422) {
      const body = (await resp.json()) as { detail: FieldError[] };
      return { ok: false, kind: "invalid", errors: body.detail };
    }
    if (!resp.ok) {
      return { ok: false, kind: "error", message: `save failed: ${resp.status}` };
    }
    const body = (await resp.json()) as { revision: number | string };
    return { ok: true, revision: String(body.revision) };
  }

  async getPredictions(frameId: string): Promise<PredictionsPayload> {
    const resp = await this.fetchFn(this.url(`/api/frames/${frameId}/predictions`));
    if (!resp.ok) throw new Error(`predictions fetch failed: ${resp.status}`);
    return (await resp.json()) as PredictionsPayload;
  }

  imageUrl(frameId: string): string {
    return this.url(`/api/frames/${frameId}/image`);
  }
}

async function textDetail(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: string };
    return body.detail ?? "revision conflict";
  } catch {
    return "revision conflict";
  }
}
