import { describe, expect, it } from "vitest";

import {
  colorForRings,
  decodeRingMap,
  heatLegend,
  quantizeRings,
  ringMapToHeat,
} from "../src/overlay.js";

describe("quantizeRings", () => {
  it("matches the service quantization examples", () => {
    expect(quantizeRings(1.0, 0.7)).toBeCloseTo(0.7, 12);
    expect(quantizeRings(0.0, 0.7)).toBe(0);
    expect(quantizeRings(2.45, 0.7)).toBeCloseTo(2.8, 12); // half-bin tie rounds away from zero
  });

  it("error never exceeds half a bin", () => {
    for (let v = 0; v <= 12; v += 0.01) {
      expect(Math.abs(quantizeRings(v, 0.7) - v)).toBeLessThanOrEqual(0.35 + 1e-9);
    }
  });

  it("rejects a nonpositive bin", () => {
    expect(() => quantizeRings(1, 0)).toThrow();
  });
});

describe("decodeRingMap", () => {
  it("recovers ring counts from 16-bit samples via the sidecar scale", () => {
    const rings = decodeRingMap(new Uint16Array([0, 5000, 35000]), 5000);
    expect(rings[0]).toBe(0);
    expect(rings[1]).toBeCloseTo(1.0, 9);
    expect(rings[2]).toBeCloseTo(7.0, 9);
  });
});

describe("ringMapToHeat", () => {
  it("keeps background transparent and paints antinode pixels", () => {
    const rgba = ringMapToHeat([0, 3.5, 11], { bin: 0.7, maxRings: 12, alpha: 140 });
    expect(rgba[3]).toBe(0); // zero stays transparent
    expect(rgba[7]).toBe(140);
    expect(rgba[11]).toBe(140);
    // higher counts are warmer (more red) under this ramp
    expect(rgba[8]).toBeGreaterThan(rgba[4]);
  });

  it("colors move monotonically along the ramp endpoints", () => {
    const low = colorForRings(0.7, 12);
    const high = colorForRings(12, 12);
    expect(high[0]).toBeGreaterThan(low[0]);
  });
});

describe("heatLegend", () => {
  it("lists one entry per bin multiple", () => {
    const legend = heatLegend(0.7, 2.8);
    expect(legend.map((e) => e.value)).toEqual([0.7, 1.4, 2.1, 2.8]);
    expect(legend[0].color).toMatch(/^rgb\(/);
  });
});
