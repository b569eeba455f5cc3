// View state lives entirely in the URL hash so every analysis view is a
// shareable deep link: #/study/<id>?tab=scatter&x=lr&y=final_value&...

export type Tab = "leaderboard" | "table" | "scatter" | "parcoords" | "progress";

export interface ViewState {
  study: string | null;
  tab: Tab;
  filter: string;
  groupBy: string;
  agg: string;
  x: string;
  y: string;
  color: string;
  trial: number | null;
  live: boolean;
  k: number;
}

export const DEFAULT_STATE: ViewState = {
  study: null,
  tab: "leaderboard",
  filter: "",
  groupBy: "",
  agg: "mean",
  x: "trial_id",
  y: "final_value",
  color: "",
  trial: null,
  live: false,
  k: 10,
};

const TABS: Tab[] = ["leaderboard", "table", "scatter", "parcoords", "progress"];

export function encodeState(state: ViewState): string {
  if (!state.study) return "#/";
  const params = new URLSearchParams();
  if (state.tab !== DEFAULT_STATE.tab) params.set("tab", state.tab);
  if (state.filter) params.set("filter", state.filter);
  if (state.groupBy) params.set("group_by", state.groupBy);
  if (state.agg !== DEFAULT_STATE.agg) params.set("agg", state.agg);
  if (state.x !== DEFAULT_STATE.x) params.set("x", state.x);
  if (state.y !== DEFAULT_STATE.y) params.set("y", state.y);
  if (state.color) params.set("color", state.color);
  if (state.trial !== null) params.set("trial", String(state.trial));
  if (state.live) params.set("live", "1");
  if (state.k !== DEFAULT_STATE.k) params.set("k", String(state.k));
  const query = params.toString();
  return `#/study/${encodeURIComponent(state.study)}${query ? "?" + query : ""}`;
}

export function decodeState(hash: string): ViewState {
  const state: ViewState = { ...DEFAULT_STATE };
  const body = hash.replace(/^#\/?/, "");
  if (!body.startsWith("study/")) return state;
  const rest = body.slice("study/".length);
  const queryAt = rest.indexOf("?");
  state.study = decodeURIComponent(queryAt < 0 ? rest : rest.slice(0, queryAt));
  if (queryAt < 0) return state;
  const params = new URLSearchParams(rest.slice(queryAt + 1));
  const tab = params.get("tab");
  if (tab && (TABS as string[]).includes(tab)) state.tab = tab as Tab;
  state.filter = params.get("filter") ?? "";
  state.groupBy = params.get("group_by") ?? "";
  state.agg = params.get("agg") ?? DEFAULT_STATE.agg;
  state.x = params.get("x") ?? DEFAULT_STATE.x;
  state.y = params.get("y") ?? DEFAULT_STATE.y;
  state.color = params.get("color") ?? "";
  const trial = params.get("trial");
  state.trial = trial !== null && trial !== "" ? Number(trial) : null;
  state.live = params.get("live") === "1";
  const k = params.get("k");
  if (k !== null && Number.isFinite(Number(k))) state.k = Number(k);
  return state;
}
