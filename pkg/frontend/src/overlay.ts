/**
 * Ring-map heat overlay: decode the 16-bit map, quantize, colorize.
 *
 * Pure array transforms; the canvas blit happens in main.ts.
 */

export const DEFAULT_BIN = 0.7;

/** Quantize to a multiple of `bin`; exact half-bin ties round away from zero. */
export function quantizeRings(value: number, bin: number = DEFAULT_BIN): number {
  if (bin <= 0) throw new Error("bin must be positive");
  const sign = Math.sign(value);
  return sign * bin * Math.floor(Math.abs(value) / bin + 0.5);
}

/** 16-bit map samples -> ring counts using the sidecar scale. */
export function decodeRingMap(samples: Uint16Array | number[], scale: number): Float32Array {
  const out = new Float32Array(samples.length);
  for (let i = 0; i < samples.length; i++) {
    out[i] = (samples[i] as number) / scale;
  }
  return out;
}

/** Warm ramp from deep blue (low) through green to yellow (high). */
export function colorForRings(rings: number, maxRings: number): [number, number, number] {
  const t = Math.min(1, Math.max(0, rings / Math.max(maxRings, 1e-9)));
  const stops: Array<[number, [number, number, number]]> = [
    [0.0, [28, 36, 120]],
    [0.35, [20, 130, 140]],
    [0.7, [90, 200, 80]],
    [1.0, [250, 230, 60]],
  ];
  for (let i = 1; i < stops.length; i++) {
    if (t <= stops[i][0]) {
      const [t0, c0] = stops[i - 1];
      const [t1, c1] = stops[i];
      const f = (t - t0) / (t1 - t0);
      return [
        Math.round(c0[0] + f * (c1[0] - c0[0])),
        Math.round(c0[1] + f * (c1[1] - c0[1])),
        Math.round(c0[2] + f * (c1[2] - c0[2])),
      ];
    }
  }
  return stops[stops.length - 1][1];
}

export interface HeatOptions {
  bin: number;
  maxRings: number;
  alpha: number; // 0..255 for nonzero pixels
}

/**
 * Build an RGBA buffer for the quantized ring map; zero stays transparent so
 * the frame shows through outside antinodes.
 */
export function ringMapToHeat(
  rings: Float32Array | number[],
  options: HeatOptions = { bin: DEFAULT_BIN, maxRings: 12, alpha: 140 },
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(rings.length * 4);
  for (let i = 0; i < rings.length; i++) {
    const q = quantizeRings(rings[i] as number, options.bin);
    if (q <= 0) continue; // transparent
    const [r, g, b] = colorForRings(q, options.maxRings);
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = options.alpha;
  }
  return out;
}

/** Legend entries for the configured bin: value and CSS color. */
export function heatLegend(bin: number, maxRings: number): Array<{ value: number; color: string }> {
  const entries: Array<{ value: number; color: string }> = [];
  for (let v = bin; v <= maxRings + 1e-9; v += bin) {
    const value = Math.round(v * 100) / 100;
    const [r, g, b] = colorForRings(value, maxRings);
    entries.push({ value, color: `rgb(${r},${g},${b})` });
  }
  return entries;
}
