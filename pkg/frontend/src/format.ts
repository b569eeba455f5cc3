import { Value } from "./types.js";

/**
 * Canonical cell rendering. Numbers go through String(), which round-trips
 * doubles exactly, so a displayed number always equals the API value.
 */
export function formatValue(value: Value | undefined): string {
  if (value === null || value === undefined) return "";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") return String(value);
  return value;
}

/** Compact display for axis ticks and badges; display-only, never reparsed. */
export function shortNumber(value: number): string {
  if (!isFinite(value)) return String(value);
  if (value === 0) return "0";
  const magnitude = Math.abs(value);
  if (magnitude >= 1000 || magnitude < 0.001) return value.toExponential(2);
  return String(parseFloat(value.toPrecision(4)));
}
