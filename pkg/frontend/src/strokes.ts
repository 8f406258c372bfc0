// Stroke model and software rasterizer for the sketch pad.
//
// Strokes live in target-image pixel coordinates. Rasterization stamps
// round caps along each polyline onto a grayscale grid (255 = white
// background, 0 = full black), so the exported sketch is exactly what the
// display canvas shows, at exactly the bundle's context-half resolution.

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  points: Point[];
  width: number;
  erase: boolean;
}

export class SketchState {
  readonly width: number;
  readonly height: number;
  private strokes: Stroke[] = [];
  private undone: Stroke[] = [];

  constructor(width: number, height: number) {
    this.width = width;
    this.height = height;
  }

  get strokeCount(): number {
    return this.strokes.length;
  }

  get isEmpty(): boolean {
    return this.strokes.length === 0;
  }

  begin(x: number, y: number, width: number, erase: boolean): void {
    this.strokes.push({ points: [{ x, y }], width, erase });
    this.undone = [];
  }

  extend(x: number, y: number): void {
    const current = this.strokes[this.strokes.length - 1];
    if (!current) return;
    const last = current.points[current.points.length - 1];
    if (last.x === x && last.y === y) return;
    current.points.push({ x, y });
  }

  undo(): boolean {
    const popped = this.strokes.pop();
    if (!popped) return false;
    this.undone.push(popped);
    return true;
  }

  redo(): boolean {
    const restored = this.undone.pop();
    if (!restored) return false;
    this.strokes.push(restored);
    return true;
  }

  clear(): void {
    if (this.strokes.length > 0) this.undone = [];
    this.strokes = [];
  }

  all(): readonly Stroke[] {
    return this.strokes;
  }
}

function stampDisc(grid: Uint8ClampedArray<ArrayBuffer>, w: number, h: number,
                   cx: number, cy: number, radius: number, value: number): void {
  const r2 = radius * radius;
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(w - 1, Math.ceil(cx + radius));
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(h - 1, Math.ceil(cy + radius));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x + 0.5 - cx;
      const dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r2) grid[y * w + x] = value;
    }
  }
}

/** Render strokes to a grayscale grid: white background, black ink,
 *  round caps; erasing paints background white. */
export function rasterize(state: SketchState): Uint8ClampedArray<ArrayBuffer> {
  const { width: w, height: h } = state;
  const grid = new Uint8ClampedArray(w * h).fill(255);
  for (const stroke of state.all()) {
    const value = stroke.erase ? 255 : 0;
    const radius = Math.max(0.5, stroke.width / 2);
    const pts = stroke.points;
    stampDisc(grid, w, h, pts[0].x, pts[0].y, radius, value);
    for (let i = 1; i < pts.length; i++) {
      const a = pts[i - 1];
      const b = pts[i];
      const dist = Math.hypot(b.x - a.x, b.y - a.y);
      const steps = Math.max(1, Math.ceil(dist / 0.25));
      for (let s = 1; s <= steps; s++) {
        const t = s / steps;
        stampDisc(grid, w, h, a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), radius, value);
      }
    }
  }
  return grid;
}

/** Grayscale grid -> RGBA pixels for putImageData. */
export function toRgba(grid: Uint8ClampedArray<ArrayBuffer>): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(grid.length * 4);
  for (let i = 0; i < grid.length; i++) {
    rgba[i * 4] = rgba[i * 4 + 1] = rgba[i * 4 + 2] = grid[i];
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}

/** RGBA pixels (from an imported PNG) -> grayscale grid, for round-trips. */
export function fromRgba(rgba: Uint8ClampedArray<ArrayBuffer>): Uint8ClampedArray<ArrayBuffer> {
  const grid = new Uint8ClampedArray(rgba.length / 4);
  for (let i = 0; i < grid.length; i++) {
    grid[i] = Math.round(
      0.299 * rgba[i * 4] + 0.587 * rgba[i * 4 + 1] + 0.114 * rgba[i * 4 + 2]);
  }
  return grid;
}
