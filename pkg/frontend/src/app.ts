// Sketch-pad wiring: draw on the canvas, submit to the completion
// service, watch progress live, iterate.

import { ApiClient, Meta, ProgressEvent, bytesToBase64 } from "./api.js";
import { curvePath, LossSample } from "./chart.js";
import { SketchState, rasterize, toRgba } from "./strokes.js";

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const api = new ApiClient("");
let meta: Meta | null = null;
let state: SketchState | null = null;
let scale = 12;
let brushWidth = 3;
let erasing = false;
let drawing = false;
let cancelWatch: (() => void) | null = null;
let uploadedPhotoB64: string | null = null;

const contextualSamples: LossSample[] = [];
const perceptualSamples: LossSample[] = [];
let previewCount = 0;

function drawPad(): void {
  if (!state) return;
  const canvas = el<HTMLCanvasElement>("pad");
  const ctx = canvas.getContext("2d")!;
  const grid = rasterize(state);
  const offscreen = document.createElement("canvas");
  offscreen.width = state.width;
  offscreen.height = state.height;
  const octx = offscreen.getContext("2d")!;
  octx.putImageData(new ImageData(toRgba(grid), state.width, state.height), 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(offscreen, 0, 0, canvas.width, canvas.height);
}

function exportSketchPng(): Promise<Blob> {
  if (!state) return Promise.reject(new Error("canvas not ready"));
  const offscreen = document.createElement("canvas");
  offscreen.width = state.width;
  offscreen.height = state.height;
  const ctx = offscreen.getContext("2d")!;
  ctx.putImageData(new ImageData(toRgba(rasterize(state)), state.width, state.height), 0, 0);
  return new Promise((resolve, reject) => {
    offscreen.toBlob((blob) => (blob ? resolve(blob) : reject(new Error("PNG export failed"))),
                     "image/png");
  });
}

function padCoords(event: PointerEvent): { x: number; y: number } {
  const canvas = el<HTMLCanvasElement>("pad");
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * state!.width,
    y: ((event.clientY - rect.top) / rect.height) * state!.height,
  };
}

function setStatus(text: string, isError = false): void {
  const banner = el<HTMLDivElement>("status");
  banner.textContent = text;
  banner.className = isError ? "status error" : "status";
}

function drawChart(totalIterations: number): void {
  const canvas = el<HTMLCanvasElement>("chart");
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(0.5, 0.5, canvas.width - 1, canvas.height - 1);
  const series: Array<[LossSample[], string]> = [
    [contextualSamples, "#c0392b"],
    [perceptualSamples, "#2980b9"],
  ];
  for (const [samples, color] of series) {
    const path = curvePath(samples, totalIterations, canvas.width, canvas.height);
    if (path.length < 2) continue;
    ctx.strokeStyle = color;
    ctx.beginPath();
    ctx.moveTo(path[0].x, path[0].y);
    for (const point of path.slice(1)) ctx.lineTo(point.x, point.y);
    ctx.stroke();
  }
}

function onProgress(event: ProgressEvent, totalIterations: number): void {
  contextualSamples.push({ iter: event.iter, value: event.contextual });
  perceptualSamples.push({ iter: event.iter, value: event.perceptual });
  el<HTMLSpanElement>("progress-text").textContent =
    `iteration ${event.iter}/${totalIterations}  contextual ${event.contextual.toFixed(4)}  ` +
    `perceptual ${event.perceptual.toFixed(4)}`;
  if (event.preview) {
    previewCount += 1;
    el<HTMLImageElement>("preview").src = `data:image/png;base64,${event.preview}`;
    el<HTMLSpanElement>("preview-count").textContent = String(previewCount);
  }
  drawChart(totalIterations);
}

async function submit(): Promise<void> {
  if (!meta) return;
  const direction = el<HTMLSelectElement>("direction").value;
  const iterations = Number(el<HTMLInputElement>("iterations").value) || meta.default_iterations;
  const lambda = Number(el<HTMLInputElement>("lambda").value);
  const seed = Number(el<HTMLInputElement>("seed").value) || 0;

  let sketchB64: string;
  if (direction === "image_to_sketch") {
    if (!uploadedPhotoB64) {
      setStatus("upload a photo first for image-to-sketch", true);
      return;
    }
    sketchB64 = uploadedPhotoB64;
  } else {
    const blob = await exportSketchPng();
    sketchB64 = bytesToBase64(new Uint8Array(await blob.arrayBuffer()));
  }

  cancelWatch?.();
  contextualSamples.length = 0;
  perceptualSamples.length = 0;
  previewCount = 0;
  el<HTMLSpanElement>("preview-count").textContent = "0";
  el<HTMLImageElement>("result").removeAttribute("src");
  el<HTMLAnchorElement>("download").classList.add("hidden");

  try {
    const id = await api.submit(sketchB64, {
      lambda: Number.isFinite(lambda) ? lambda : undefined,
      iterations, seed, direction,
    });
    setStatus(`job ${id} running...`);
    cancelWatch = api.watch(id, {
      onEvent: (event) => onProgress(event, iterations),
      onEnd: (stateName, error) => {
        if (stateName === "done") {
          const url = api.resultUrl(id);
          el<HTMLImageElement>("result").src = `${url}?t=${Date.now()}`;
          const link = el<HTMLAnchorElement>("download");
          link.href = url;
          link.classList.remove("hidden");
          setStatus("done");
        } else {
          setStatus(`job failed: ${error ?? "unknown error"}`, true);
        }
      },
      onError: (message) => setStatus(`connection lost (${message}), retrying...`, true),
    });
  } catch (err) {
    setStatus(`submit failed: ${err instanceof Error ? err.message : err}`, true);
  }
}

async function init(): Promise<void> {
  try {
    meta = await api.meta();
  } catch (err) {
    setStatus(`service unreachable: ${err instanceof Error ? err.message : err}`, true);
    return;
  }
  state = new SketchState(meta.image_size, meta.image_size);
  const canvas = el<HTMLCanvasElement>("pad");
  scale = Math.max(4, Math.floor(384 / meta.image_size));
  canvas.width = meta.image_size * scale;
  canvas.height = meta.image_size * scale;
  el<HTMLSpanElement>("meta-line").textContent =
    `${meta.image_size}x${meta.image_size} context, style ${meta.style}`;
  el<HTMLInputElement>("iterations").value = String(meta.default_iterations);
  drawPad();

  canvas.addEventListener("pointerdown", (event) => {
    drawing = true;
    canvas.setPointerCapture(event.pointerId);
    const { x, y } = padCoords(event);
    state!.begin(x, y, brushWidth, erasing);
    drawPad();
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!drawing) return;
    const { x, y } = padCoords(event);
    state!.extend(x, y);
    drawPad();
  });
  const stop = () => { drawing = false; };
  canvas.addEventListener("pointerup", stop);
  canvas.addEventListener("pointercancel", stop);

  el<HTMLInputElement>("brush").addEventListener("input", (event) => {
    brushWidth = Number((event.target as HTMLInputElement).value);
    el<HTMLSpanElement>("brush-label").textContent = String(brushWidth);
  });
  el<HTMLButtonElement>("eraser").addEventListener("click", (event) => {
    erasing = !erasing;
    (event.target as HTMLButtonElement).classList.toggle("active", erasing);
  });
  el<HTMLButtonElement>("undo").addEventListener("click", () => { state!.undo(); drawPad(); });
  el<HTMLButtonElement>("redo").addEventListener("click", () => { state!.redo(); drawPad(); });
  el<HTMLButtonElement>("clear").addEventListener("click", () => { state!.clear(); drawPad(); });
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submit());

  el<HTMLSelectElement>("direction").addEventListener("change", (event) => {
    const reverse = (event.target as HTMLSelectElement).value === "image_to_sketch";
    el<HTMLDivElement>("photo-upload").classList.toggle("hidden", !reverse);
  });
  el<HTMLInputElement>("photo").addEventListener("change", async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (!file) return;
    uploadedPhotoB64 = bytesToBase64(new Uint8Array(await file.arrayBuffer()));
    setStatus(`photo loaded (${file.name})`);
  });

  setStatus("ready: draw, then generate");
}

window.addEventListener("DOMContentLoaded", () => void init());
