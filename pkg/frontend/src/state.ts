/**
 * Editor session: queue walking, working-copy edits, optimistic saves.
 *
 * All state transitions live here (no DOM) so the curation behaviors are
 * testable headlessly; main.ts only renders the state and forwards events.
 */

import type { EditorApi, SaveResult } from "./api.js";
import {
  applyHandleDrag,
  clampRings,
  sameGeometry,
  type HandleKind,
} from "./geometry.js";
import type {
  EllipseAnnotation,
  FieldError,
  FrameRecord,
  PredictionsPayload,
  QueueEntry,
} from "./types.js";

export type Banner = "none" | "queue-done" | "offline";

export interface OverlayToggles {
  boxes: boolean;
  ellipses: boolean;
  ringmap: boolean;
}

export interface ConflictInfo {
  message: string;
}

export class EditorSession {
  queue: QueueEntry[] = [];
  cursor = -1;
  frameId: string | null = null;
  working: FrameRecord | null = null;
  baseline: FrameRecord | null = null;
  predictions: PredictionsPayload | null = null;
  revision: string | null = null;
  selected = -1;
  overlays: OverlayToggles = { boxes: true, ellipses: true, ringmap: false };
  banner: Banner = "none";
  conflict: ConflictInfo | null = null;
  fieldErrors: FieldError[] | null = null;

  constructor(private readonly api: EditorApi) {}

  get dirty(): boolean {
    if (this.working === null || this.baseline === null) return false;
    const a = this.working.annotations;
    const b = this.baseline.annotations;
    if (a.length !== b.length) return true;
    return a.some((ann, i) => !sameGeometry(ann, b[i], 0));
  }

  async loadQueue(): Promise<void> {
    try {
      this.queue = await this.api.getQueue();
      this.cursor = -1;
      this.banner = "none";
    } catch {
      this.banner = "offline";
    }
  }

  /** Advance to the next frame in loss order; flags completion at the end. */
  async loadNext(): Promise<void> {
    if (this.cursor + 1 >= this.queue.length) {
      this.banner = "queue-done";
      return;
    }
    await this.loadAt(this.cursor + 1);
  }

  async loadAt(index: number): Promise<void> {
    const entry = this.queue[index];
    if (!entry) return;
    try {
      const { record, revision } = await this.api.getAnnotations(entry.frame_id);
      let predictions: PredictionsPayload | null = null;
      try {
        predictions = await this.api.getPredictions(entry.frame_id);
      } catch {
        predictions = { detections: [] };
      }
      this.cursor = index;
      this.frameId = entry.frame_id;
      this.baseline = cloneRecord(record);
      this.working = cloneRecord(record);
      this.predictions = predictions;
      this.revision = revision;
      this.selected = record.annotations.length > 0 ? 0 : -1;
      this.banner = "none";
      this.conflict = null;
      this.fieldErrors = null;
    } catch {
      this.banner = "offline"; // cursor unchanged: retry re-attempts this frame
    }
  }

  async retry(): Promise<void> {
    if (this.banner !== "offline") return;
    if (this.queue.length === 0) {
      await this.loadQueue();
      return;
    }
    await this.loadAt(this.cursor + 1 < this.queue.length ? this.cursor + 1 : this.cursor);
  }

  imageUrl(): string | null {
    return this.frameId === null ? null : this.api.imageUrl(this.frameId);
  }

  select(index: number): void {
    if (this.working && index >= -1 && index < this.working.annotations.length) {
      this.selected = index;
    }
  }

  selectedAnnotation(): EllipseAnnotation | null {
    if (!this.working || this.selected < 0) return null;
    return this.working.annotations[this.selected] ?? null;
  }

  dragHandle(handle: HandleKind, x: number, y: number): void {
    const current = this.selectedAnnotation();
    if (!current || !this.working) return;
    this.working.annotations[this.selected] = applyHandleDrag(current, handle, x, y);
  }

  setRings(value: number): void {
    const current = this.selectedAnnotation();
    if (!current || !this.working) return;
    this.working.annotations[this.selected] = { ...current, rings: clampRings(value) };
  }

  addAnnotation(ann: EllipseAnnotation): void {
    if (!this.working) return;
    this.working.annotations.push(ann);
    this.selected = this.working.annotations.length - 1;
  }

  removeSelected(): void {
    if (!this.working || this.selected < 0) return;
    this.working.annotations.splice(this.selected, 1);
    this.selected = Math.min(this.selected, this.working.annotations.length - 1);
  }

  /** Local invariant check mirroring the server's 422 validation. */
  validate(): FieldError[] {
    const errors: FieldError[] = [];
    if (!this.working) return errors;
    this.working.annotations.forEach((ann, i) => {
      const prefix = `annotations[${i}]`;
      if (!(ann.b > 0)) errors.push({ field: `${prefix}.b`, message: "must be positive" });
      else if (ann.a < ann.b) errors.push({ field: `${prefix}.a`, message: "a must be >= b" });
      if (ann.rings < 0) errors.push({ field: `${prefix}.rings`, message: "must be >= 0" });
    });
    return errors;
  }

  /**
   * Save the working copy with optimistic concurrency. Invalid local state
   * never reaches the network; a stale revision surfaces as a conflict.
   */
  async save(): Promise<SaveResult | null> {
    if (!this.working || this.frameId === null || !this.dirty) return null;
    const localErrors = this.validate();
    if (localErrors.length > 0) {
      this.fieldErrors = localErrors;
      return { ok: false, kind: "invalid", errors: localErrors };
    }
    const result = await this.api.putAnnotations(this.frameId, this.working, this.revision);
    if (result.ok) {
      this.revision = result.revision;
      this.baseline = cloneRecord(this.working);
      this.conflict = null;
      this.fieldErrors = null;
    } else if (result.kind === "conflict") {
      this.conflict = { message: result.current };
    } else if (result.kind === "invalid") {
      this.fieldErrors = result.errors;
    }
    return result;
  }

  /** Drop local edits and refetch the current frame (conflict resolution). */
  async reloadCurrent(): Promise<void> {
    if (this.cursor >= 0) {
      await this.loadAt(this.cursor);
    }
  }

  /** Navigation is gated while edits are unsaved. */
  needsConfirmToLeave(): boolean {
    return this.dirty;
  }

  toggleOverlay(key: keyof OverlayToggles): void {
    this.overlays[key] = !this.overlays[key];
  }
}

function cloneRecord(record: FrameRecord): FrameRecord {
  return {
    frame_id: record.frame_id,
    annotations: record.annotations.map((a) => ({ ...a })),
  };
}
