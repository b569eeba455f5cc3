// Pixel scales for the SVG plots. The mapping is invertible, which is what
// the contract tests verify: a point's pixel position maps back to exactly
// the API value that produced it (within float round-trip).

export interface LinearScale {
  domain: [number, number];
  range: [number, number];
  toPixel(value: number): number;
  fromPixel(pixel: number): number;
  ticks(count?: number): number[];
}

export function linearScale(domain: [number, number], range: [number, number]): LinearScale {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 0.5;
    d1 += 0.5;
  }
  const [r0, r1] = range;
  const slope = (r1 - r0) / (d1 - d0);
  return {
    domain: [d0, d1],
    range,
    toPixel: (value) => r0 + (value - d0) * slope,
    fromPixel: (pixel) => d0 + (pixel - r0) / slope,
    ticks: (count = 5) => {
      const step = (d1 - d0) / (count - 1);
      return Array.from({ length: count }, (_, i) => d0 + i * step);
    },
  };
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) return [0, 1];
  return [lo, hi];
}

/** Categorical ordinal position: evenly spaced band centers in [0, n-1]. */
export function categoryIndex(categories: string[]): Map<string, number> {
  return new Map(categories.map((c, i) => [c, i]));
}
