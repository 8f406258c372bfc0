// Loss-curve geometry: map (iteration, loss) samples to canvas-space
// polylines. Pure math so it is testable; drawing happens in app.ts.

export interface CurvePoint {
  x: number;
  y: number;
}

export interface LossSample {
  iter: number;
  value: number;
}

/**
 * Scale samples into a width x height box. The x axis always spans
 * [0, totalIterations] so the curve grows rightward as events arrive.
 */
export function curvePath(samples: LossSample[], totalIterations: number,
                          width: number, height: number, pad = 4): CurvePoint[] {
  if (samples.length === 0 || totalIterations <= 0) return [];
  const values = samples.map((s) => s.value).filter((v) => Number.isFinite(v));
  if (values.length === 0) return [];
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (hi - lo < 1e-12) {
    hi = lo + 1;
  }
  return samples.map((s) => ({
    x: pad + (s.iter / totalIterations) * (width - 2 * pad),
    y: pad + (1 - (s.value - lo) / (hi - lo)) * (height - 2 * pad),
  }));
}
