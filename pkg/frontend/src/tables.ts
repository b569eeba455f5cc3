// Table view-models. Cells are rendered with formatValue only, so every
// number shown is exactly an API response value.

import { formatValue } from "./format.js";
import {
  GroupedResponse,
  LeaderboardResponse,
  Row,
  TrialsResponse,
  Value,
} from "./types.js";

export interface TableRow {
  cells: string[];
  trialId: number | null;
  state: string | null;
}

export interface TableModel {
  columns: string[];
  rows: TableRow[];
}

function toTableRow(row: Row, columns: string[]): TableRow {
  return {
    cells: columns.map((col) => formatValue(row[col])),
    trialId: typeof row.trial_id === "number" ? row.trial_id : null,
    state: typeof row.state === "string" ? row.state : null,
  };
}

/** Leaderboard: id and metric first, then the configuration columns. */
export function leaderboardModel(
  response: LeaderboardResponse,
  paramNames: string[],
): TableModel {
  const columns = ["trial_id", "final_value", ...paramNames, "steps", "seed"];
  return {
    columns,
    rows: response.rows.map((row) => toTableRow(row, columns)),
  };
}

export function trialsTableModel(response: TrialsResponse): TableModel {
  return {
    columns: response.columns,
    rows: response.rows.map((row) => toTableRow(row, response.columns)),
  };
}

export function groupedModel(response: GroupedResponse): TableModel {
  const columns = [...response.group_by, "count", `${response.agg}(${response.metric})`];
  const rows = response.groups.map((group) => ({
    cells: [
      ...response.group_by.map((col) => formatValue(group.key[col])),
      String(group.count),
      formatValue(group.value),
    ],
    trialId: null,
    state: null,
  }));
  return { columns, rows };
}

/** Stable client-side sort; reorders rows without touching any value. */
export function sortRows(rows: Row[], column: string, descending: boolean): Row[] {
  const indexed = rows.map((row, i) => ({ row, i }));
  const sign = descending ? -1 : 1;
  indexed.sort((a, b) => {
    const va = a.row[column] as Value | undefined;
    const vb = b.row[column] as Value | undefined;
    if (va === vb) return a.i - b.i;
    if (va === null || va === undefined) return 1;
    if (vb === null || vb === undefined) return -1;
    if (typeof va === "number" && typeof vb === "number") {
      return sign * (va - vb) || a.i - b.i;
    }
    return sign * String(va).localeCompare(String(vb)) || a.i - b.i;
  });
  return indexed.map((entry) => entry.row);
}
