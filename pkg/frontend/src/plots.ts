// Scatter, parallel-coordinates, and curve view-models.

import { categoryIndex, extent, linearScale, LinearScale } from "./scales.js";
import { INACTIVE, PlotResponse, Row, TrialDetail, Value } from "./types.js";

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const PLOT_MARGIN: Margin = { top: 16, right: 16, bottom: 36, left: 56 };

export interface ScatterPoint {
  x: Value;
  y: number;
  series: string;
  cx: number;
  cy: number;
}

export interface ScatterModel {
  points: ScatterPoint[];
  seriesLabels: string[];
  xScale: LinearScale;
  yScale: LinearScale;
  /** Category labels in axis order when x is categorical, else null. */
  xCategories: string[] | null;
}

export function scatterModel(
  response: PlotResponse,
  width: number,
  height: number,
  margin: Margin = PLOT_MARGIN,
): ScatterModel {
  const all = response.series.flatMap((s) => s.points);
  const numericX = all.every(([x]) => typeof x === "number");
  let xCategories: string[] | null = null;
  let xOf: (value: Value) => number;
  if (numericX) {
    xOf = (value) => value as number;
  } else {
    xCategories = [...new Set(all.map(([x]) => String(x)))].sort();
    const index = categoryIndex(xCategories);
    xOf = (value) => index.get(String(value)) ?? 0;
  }
  const xScale = linearScale(
    numericX ? extent(all.map(([x]) => x as number)) : [0, Math.max(1, (xCategories as string[]).length - 1)],
    [margin.left, width - margin.right],
  );
  const yScale = linearScale(
    extent(all.map(([, y]) => y)),
    [height - margin.bottom, margin.top],
  );
  const points: ScatterPoint[] = [];
  for (const series of response.series) {
    for (const [x, y] of series.points) {
      points.push({
        x,
        y,
        series: series.label,
        cx: xScale.toPixel(xOf(x)),
        cy: yScale.toPixel(y),
      });
    }
  }
  return {
    points,
    seriesLabels: response.series.map((s) => s.label),
    xScale,
    yScale,
    xCategories,
  };
}

export interface ParcoordsAxis {
  name: string;
  kind: "numeric" | "categorical";
  /** numeric: [min, max]; categorical: ordered labels. */
  numericDomain: [number, number] | null;
  categories: string[] | null;
}

export interface ParcoordsLine {
  trialId: Value;
  state: Value;
  metric: number | null;
  /** Normalized 0..1 position per axis; null where the parameter was inactive. */
  positions: (number | null)[];
}

export interface ParcoordsModel {
  axes: ParcoordsAxis[];
  lines: ParcoordsLine[];
  metricDomain: [number, number];
}

export function buildAxis(name: string, values: Value[]): ParcoordsAxis {
  const present = values.filter((v) => v !== null && v !== INACTIVE);
  const numeric = present.length > 0 && present.every((v) => typeof v === "number");
  if (numeric) {
    return {
      name,
      kind: "numeric",
      numericDomain: extent(present as number[]),
      categories: null,
    };
  }
  return {
    name,
    kind: "categorical",
    numericDomain: null,
    categories: [...new Set(present.map((v) => String(v)))].sort(),
  };
}

/** Normalized axis position in [0, 1], or null for inactive/missing values. */
export function axisPosition(axis: ParcoordsAxis, value: Value | undefined): number | null {
  if (value === null || value === undefined || value === INACTIVE) return null;
  if (axis.kind === "numeric") {
    const [lo, hi] = axis.numericDomain as [number, number];
    if (typeof value !== "number") return null;
    return hi === lo ? 0.5 : (value - lo) / (hi - lo);
  }
  const categories = axis.categories as string[];
  const index = categories.indexOf(String(value));
  if (index < 0) return null;
  return categories.length === 1 ? 0.5 : index / (categories.length - 1);
}

export function parcoordsModel(rows: Row[], columns: string[], metric: string): ParcoordsModel {
  const axes = columns.map((name) => buildAxis(name, rows.map((row) => row[name] ?? null)));
  const metricValues = rows
    .map((row) => row[metric])
    .filter((v): v is number => typeof v === "number");
  const lines = rows.map((row) => ({
    trialId: row.trial_id ?? null,
    state: row.state ?? null,
    metric: typeof row[metric] === "number" ? (row[metric] as number) : null,
    positions: axes.map((axis) => axisPosition(axis, row[axis.name])),
  }));
  return { axes, lines, metricDomain: extent(metricValues) };
}

export interface CurveModel {
  /** (step, value) points exactly as reported by the API. */
  points: [number, number][];
  rungs: number[];
  pruned: boolean;
}

export function trialCurveModel(detail: TrialDetail): CurveModel {
  return {
    points: detail.curve.map(([s, v]) => [s, v]),
    rungs: detail.rungs,
    pruned: detail.state === "pruned",
  };
}

/** Best-so-far progress: the transform happens server-side. */
export function progressPoints(response: PlotResponse): [Value, number][] {
  return response.series.length ? [...response.series[0].points] : [];
}
