import { describe, expect, it } from "vitest";

import { DEFAULT_STATE, decodeState, encodeState, ViewState } from "../src/state";

describe("deep-link state", () => {
  it("round-trips the default study view", () => {
    const state: ViewState = { ...DEFAULT_STATE, study: "demo" };
    expect(decodeState(encodeState(state))).toEqual(state);
  });

  it("round-trips every field", () => {
    const state: ViewState = {
      study: "planted study",
      tab: "scatter",
      filter: "aggregator=attention,lr>=0.3",
      groupBy: "normalization",
      agg: "median",
      x: "lr",
      y: "last_value",
      color: "aggregator",
      trial: 17,
      live: true,
      k: 25,
    };
    const encoded = encodeState(state);
    expect(decodeState(encoded)).toEqual(state);
    // encoding is canonical: a second round trip is byte-identical
    expect(encodeState(decodeState(encoded))).toBe(encoded);
  });

  it("round-trips a grid of partial states", () => {
    const tabs = ["leaderboard", "table", "scatter", "parcoords", "progress"] as const;
    for (const tab of tabs) {
      for (const trial of [null, 0, 42]) {
        for (const live of [false, true]) {
          const state: ViewState = {
            ...DEFAULT_STATE,
            study: "s1",
            tab,
            trial,
            live,
            filter: live ? "state=complete" : "",
          };
          expect(decodeState(encodeState(state))).toEqual(state);
        }
      }
    }
  });

  it("falls back to the study list for unknown hashes", () => {
    expect(decodeState("")).toEqual(DEFAULT_STATE);
    expect(decodeState("#/")).toEqual(DEFAULT_STATE);
    expect(decodeState("#/nonsense")).toEqual(DEFAULT_STATE);
  });

  it("ignores unknown tabs but keeps the study", () => {
    const state = decodeState("#/study/demo?tab=bogus");
    expect(state.study).toBe("demo");
    expect(state.tab).toBe(DEFAULT_STATE.tab);
  });
});
