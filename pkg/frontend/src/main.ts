/** DOM bootstrap: wires the editor session to the canvas and controls. */

import { HttpApi } from "./api.js";
import {
  ellipseBoundaryPoints,
  ellipseToBBox,
  handlePositions,
  hitTestHandle,
  RING_STEP,
  type HandleKind,
} from "./geometry.js";
import { decodeRingMap, heatLegend, ringMapToHeat } from "./overlay.js";
import { EditorSession } from "./state.js";

const api = new HttpApi("");
const session = new EditorSession(api);

const canvas = document.getElementById("frame") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const queueEl = document.getElementById("queue")!;
const ringsEl = document.getElementById("rings") as HTMLInputElement;
const legendEl = document.getElementById("legend")!;

let image: HTMLImageElement | null = null;
let heat: ImageData | null = null;
let dragging: HandleKind | null = null;

function setStatus(text: string): void {
  statusEl.textContent = text;
}

async function loadHeatOverlay(): Promise<void> {
  heat = null;
  const mapUrl = session.predictions?.map_url;
  if (!mapUrl) return;
  try {
    const sidecar = (await (await fetch(`${mapUrl}.json`)).json()) as {
      scale: number;
      bin?: number;
    };
    const blob = await (await fetch(mapUrl)).blob();
    const bmp = await createImageBitmap(blob);
    const off = document.createElement("canvas");
    off.width = bmp.width;
    off.height = bmp.height;
    const octx = off.getContext("2d")!;
    octx.drawImage(bmp, 0, 0);
    const px = octx.getImageData(0, 0, bmp.width, bmp.height);
    // 16-bit grayscale arrives as 8-bit through the canvas: recover the
    // coarse value from the red channel (sufficient for display).
    const samples = new Uint16Array(bmp.width * bmp.height);
    for (let i = 0; i < samples.length; i++) {
      samples[i] = (px.data[i * 4] / 255) * 65535;
    }
    const rings = decodeRingMap(samples, sidecar.scale);
    const rgba = ringMapToHeat(rings, {
      bin: sidecar.bin ?? 0.7,
      maxRings: 12,
      alpha: 130,
    });
    heat = new ImageData(new Uint8ClampedArray(rgba), bmp.width, bmp.height);
    legendEl.innerHTML = heatLegend(sidecar.bin ?? 0.7, 12)
      .map((e) => `<span style="background:${e.color}">${e.value.toFixed(1)}</span>`)
      .join("");
  } catch {
    heat = null;
  }
}

function draw(): void {
  if (!image) return;
  canvas.width = image.naturalWidth;
  canvas.height = image.naturalHeight;
  ctx.drawImage(image, 0, 0);
  if (session.overlays.ringmap && heat) {
    const off = document.createElement("canvas");
    off.width = heat.width;
    off.height = heat.height;
    off.getContext("2d")!.putImageData(heat, 0, 0);
    ctx.drawImage(off, 0, 0);
  }
  if (session.overlays.boxes && session.predictions) {
    ctx.strokeStyle = "rgba(255,140,0,0.9)";
    ctx.lineWidth = 1.5;
    for (const det of session.predictions.detections) {
      const b = det.bbox;
      ctx.strokeRect(b.x_min, b.y_min, b.x_max - b.x_min, b.y_max - b.y_min);
      ctx.fillStyle = "rgba(255,140,0,0.9)";
      ctx.fillText(`${det.rings.toFixed(1)} (${det.score.toFixed(2)})`, b.x_min, b.y_min - 3);
    }
  }
  if (session.overlays.ellipses && session.working) {
    session.working.annotations.forEach((ann, i) => {
      ctx.strokeStyle = i === session.selected ? "rgba(80,220,120,1)" : "rgba(80,160,255,0.9)";
      ctx.lineWidth = i === session.selected ? 2 : 1.5;
      const pts = ellipseBoundaryPoints(ann, 120);
      ctx.beginPath();
      pts.forEach(([x, y], k) => (k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
      ctx.closePath();
      ctx.stroke();
      ctx.fillStyle = ctx.strokeStyle;
      const box = ellipseToBBox(ann);
      ctx.fillText(ann.rings.toFixed(1), box.x_min, box.y_min - 3);
      if (i === session.selected) {
        for (const h of handlePositions(ann)) {
          ctx.beginPath();
          ctx.arc(h.x, h.y, 4, 0, 2 * Math.PI);
          ctx.fill();
        }
      }
    });
  }
  const current = session.selectedAnnotation();
  ringsEl.value = current ? String(current.rings) : "";
  setStatus(
    `${session.frameId ?? "-"}  ${session.dirty ? "UNSAVED EDITS" : "saved"}` +
      (session.conflict ? "  CONFLICT: reload to resolve" : "") +
      (session.fieldErrors ? `  invalid: ${session.fieldErrors.map((e) => e.field).join(", ")}` : ""),
  );
}

async function showCurrent(): Promise<void> {
  const url = session.imageUrl();
  if (!url) return;
  image = new Image();
  image.onload = () => draw();
  image.src = url;
  await loadHeatOverlay();
  renderQueue();
}

function renderQueue(): void {
  queueEl.innerHTML = session.queue
    .map((entry, i) => {
      const mark = i === session.cursor ? "▶" : "";
      return `<li data-index="${i}">${mark} ${entry.frame_id} — ${entry.loss.toFixed(3)}</li>`;
    })
    .join("");
}

async function next(): Promise<void> {
  if (session.needsConfirmToLeave() && !window.confirm("Discard unsaved edits?")) return;
  await session.loadNext();
  if (session.banner === "queue-done") {
    setStatus("Queue complete — every frame reviewed.");
    return;
  }
  if (session.banner === "offline") {
    setStatus("Server unreachable; press Next to retry.");
    return;
  }
  await showCurrent();
}

canvas.addEventListener("mousedown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  const current = session.selectedAnnotation();
  if (current) {
    dragging = hitTestHandle(current, x, y, 10);
    if (dragging) return;
  }
  if (session.working) {
    const hit = session.working.annotations.findIndex((ann) => {
      const b = ellipseToBBox(ann);
      return x >= b.x_min && x <= b.x_max && y >= b.y_min && y <= b.y_max;
    });
    session.select(hit);
    draw();
  }
});

canvas.addEventListener("mousemove", (ev) => {
  if (!dragging) return;
  const rect = canvas.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  session.dragHandle(dragging, x, y);
  draw();
});

window.addEventListener("mouseup", () => (dragging = null));

document.getElementById("next")!.addEventListener("click", () => void next());
document.getElementById("save")!.addEventListener("click", async () => {
  const result = await session.save();
  if (result && !result.ok && result.kind === "conflict") {
    if (window.confirm("Server copy changed (stale revision). Reload server version?")) {
      await session.reloadCurrent();
      await showCurrent();
    }
  }
  draw();
});
document.getElementById("reload")!.addEventListener("click", async () => {
  await session.reloadCurrent();
  await showCurrent();
});
ringsEl.addEventListener("change", () => {
  session.setRings(Number(ringsEl.value));
  draw();
});
document.getElementById("ring-up")!.addEventListener("click", () => {
  const current = session.selectedAnnotation();
  if (current) session.setRings(current.rings + RING_STEP);
  draw();
});
document.getElementById("ring-down")!.addEventListener("click", () => {
  const current = session.selectedAnnotation();
  if (current) session.setRings(current.rings - RING_STEP);
  draw();
});
for (const key of ["boxes", "ellipses", "ringmap"] as const) {
  document.getElementById(`toggle-${key}`)!.addEventListener("change", () => {
    session.toggleOverlay(key);
    draw();
  });
}
queueEl.addEventListener("click", async (ev) => {
  const item = (ev.target as HTMLElement).closest("li");
  if (!item) return;
  if (session.needsConfirmToLeave() && !window.confirm("Discard unsaved edits?")) return;
  await session.loadAt(Number(item.dataset.index));
  await showCurrent();
});

window.addEventListener("beforeunload", (ev) => {
  if (session.needsConfirmToLeave()) {
    ev.preventDefault();
  }
});

void (async () => {
  setStatus("loading queue…");
  await session.loadQueue();
  if (session.banner === "offline") {
    setStatus("Server unreachable; reload page to retry.");
    return;
  }
  await next();
})();
