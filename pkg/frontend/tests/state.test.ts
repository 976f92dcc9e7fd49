import { beforeEach, describe, expect, it } from "vitest";

import { EditorSession } from "../src/state.js";
import { MockServer, ellipse } from "./mock_api.js";

let server: MockServer;
let session: EditorSession;

beforeEach(() => {
  server = new MockServer();
  server.addFrame("low", [ellipse({ rings: 2 })], 0.1);
  server.addFrame("high", [ellipse({ rings: 5 })], 2.0);
  server.addFrame("mid", [ellipse({ rings: 3 })], 0.5);
  session = new EditorSession(server);
});

describe("queue walking", () => {
  it("serves the highest-loss frame first", async () => {
    await session.loadQueue();
    await session.loadNext();
    expect(session.frameId).toBe("high");
    expect(session.queue[0].frame_id).toBe("high");
  });

  it("walks in decreasing-loss order and finishes with a banner", async () => {
    await session.loadQueue();
    const seen: string[] = [];
    for (let i = 0; i < 3; i++) {
      await session.loadNext();
      seen.push(session.frameId!);
    }
    expect(seen).toEqual(["high", "mid", "low"]);
    await session.loadNext();
    expect(session.banner).toBe("queue-done");
  });

  it("flags offline and retries the same frame", async () => {
    await session.loadQueue();
    server.failNetwork = true;
    await session.loadNext();
    expect(session.banner).toBe("offline");
    expect(session.frameId).toBeNull();
    server.failNetwork = false;
    await session.retry();
    expect(session.frameId).toBe("high");
    expect(session.banner).toBe("none");
  });
});

describe("dirty tracking", () => {
  beforeEach(async () => {
    await session.loadQueue();
    await session.loadNext();
  });

  it("is clean after load", () => {
    expect(session.dirty).toBe(false);
  });

  it("is dirty exactly when the working copy differs", () => {
    session.dragHandle("center", 123, 77);
    expect(session.dirty).toBe(true);
    session.dragHandle("center", 100, 80); // back to the fetched values
    expect(session.dirty).toBe(false);
  });

  it("ring edits mark dirty", () => {
    session.setRings(9);
    expect(session.dirty).toBe(true);
  });

  it("gates navigation while dirty", () => {
    expect(session.needsConfirmToLeave()).toBe(false);
    session.setRings(9);
    expect(session.needsConfirmToLeave()).toBe(true);
  });
});

describe("saving", () => {
  beforeEach(async () => {
    await session.loadQueue();
    await session.loadNext();
  });

  it("clean save bumps the revision and clears dirty", async () => {
    session.setRings(6);
    const result = await session.save();
    expect(result && result.ok).toBe(true);
    expect(session.dirty).toBe(false);
    expect(session.revision).toBe("1");
    expect(server.frames.get("high")!.annotations[0].rings).toBe(6);
  });

  it("saving without edits is a no-op", async () => {
    expect(await session.save()).toBeNull();
  });

  it("stale revision surfaces a conflict for the dialog", async () => {
    session.setRings(6);
    server.externalEdit();
    const result = await session.save();
    expect(result && !result.ok && result.kind).toBe("conflict");
    expect(session.conflict).not.toBeNull();
    // reload resolves: server copy wins, dirty cleared
    await session.reloadCurrent();
    expect(session.conflict).toBeNull();
    expect(session.dirty).toBe(false);
  });

  it("locally invalid counts never reach the network", async () => {
    const before = server.revision;
    session.working!.annotations[0].rings = -3; // keyboard bypasses the stepper
    const result = await session.save();
    expect(result && !result.ok && result.kind).toBe("invalid");
    expect(session.fieldErrors?.some((e) => e.field.includes("rings"))).toBe(true);
    expect(server.revision).toBe(before);
  });

  it("server-side 422 highlights the offending field", async () => {
    // bypass local validation to exercise the server path
    session.validate = () => [];
    session.working!.annotations[0].a = 5;
    session.working!.annotations[0].b = 9;
    const result = await session.save();
    expect(result && !result.ok && result.kind).toBe("invalid");
    expect(session.fieldErrors?.some((e) => e.field.includes(".a"))).toBe(true);
  });
});

describe("selection and annotation list edits", () => {
  beforeEach(async () => {
    await session.loadQueue();
    await session.loadNext();
  });

  it("adding and removing annotations tracks selection", () => {
    session.addAnnotation(ellipse({ cx: 222 }));
    expect(session.selected).toBe(1);
    session.removeSelected();
    expect(session.selected).toBe(0);
    expect(session.working!.annotations).toHaveLength(1);
  });

  it("overlay toggles flip", () => {
    expect(session.overlays.ringmap).toBe(false);
    session.toggleOverlay("ringmap");
    expect(session.overlays.ringmap).toBe(true);
  });
});
