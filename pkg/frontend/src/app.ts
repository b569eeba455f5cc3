// Single-page explorer over the study service. All state lives in the URL
// hash (deep-linkable); every displayed number comes straight from an API
// response via the view-model modules.

import { ApiClient } from "./api.js";
import { downloadText, rowsToCsv, serializeSvg } from "./exports.js";
import { formatValue, shortNumber } from "./format.js";
import {
  CurveModel,
  PLOT_MARGIN,
  parcoordsModel,
  progressPoints,
  scatterModel,
  trialCurveModel,
} from "./plots.js";
import { advanceCursor, Cursor, PollHandle, startPolling } from "./poll.js";
import { decodeState, encodeState, Tab, ViewState } from "./state.js";
import { groupedModel, leaderboardModel, sortRows, trialsTableModel, TableModel } from "./tables.js";
import { PlotResponse, Row, StudyDetail, Value } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const PALETTE = ["#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed", "#0891b2", "#be185d"];

type Attrs = Record<string, string | number | boolean | ((event: Event) => void)>;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Attrs = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      node.addEventListener(key, value as EventListener);
    } else if (key === "class") {
      node.className = String(value);
    } else if (typeof value === "boolean") {
      if (value) node.setAttribute(key, "");
    } else {
      node.setAttribute(key, String(value));
    }
  }
  node.append(...children);
  return node;
}

function svg(tag: string, attrs: Record<string, string | number> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

function metricColor(value: number | null, domain: [number, number]): string {
  if (value === null) return "#94a3b8";
  const [lo, hi] = domain;
  const t = hi === lo ? 0.5 : (value - lo) / (hi - lo);
  const hue = 220 - 220 * t; // blue (best when minimizing) to red
  return `hsl(${hue}, 70%, 45%)`;
}

class App {
  private api = new ApiClient();
  private state: ViewState = decodeState(location.hash);
  private root: HTMLElement;
  private poll: PollHandle | null = null;
  private cursor: Cursor = { seq: 0 };
  private sortColumn: string | null = null;
  private sortDescending = false;
  private lastRows: { columns: string[]; rows: Row[] } | null = null;
  private currentSvg: SVGSVGElement | null = null;

  constructor(root: HTMLElement) {
    this.root = root;
    window.addEventListener("hashchange", () => {
      this.state = decodeState(location.hash);
      void this.render();
    });
  }

  private push(update: Partial<ViewState>): void {
    this.state = { ...this.state, ...update };
    const hash = encodeState(this.state);
    if (hash !== location.hash) {
      location.hash = hash; // triggers hashchange -> render
    } else {
      void this.render();
    }
  }

  async render(): Promise<void> {
    this.stopPolling();
    this.root.replaceChildren(el("div", { class: "loading" }, "loading..."));
    try {
      if (!this.state.study) {
        await this.renderStudyList();
      } else {
        await this.renderStudy(this.state.study);
      }
    } catch (error) {
      this.renderBanner(error);
    }
  }

  private renderBanner(error: unknown): void {
    const message = error instanceof Error ? error.message : String(error);
    this.root.replaceChildren(
      el(
        "div",
        { class: "banner" },
        el("strong", {}, "service unreachable or request failed"),
        el("div", { class: "banner-detail" }, message),
        el("button", { click: () => void this.render() }, "retry"),
      ),
    );
  }

  private async renderStudyList(): Promise<void> {
    const body = await this.api.studies();
    const cards = body.studies.map((study) =>
      el(
        "a",
        { class: "card", href: encodeState({ ...this.state, study: study.id }) },
        el("h3", {}, study.id),
        el(
          "div",
          { class: "meta" },
          `${study.mode} · ${study.direction} · ${study.metric} · ${study.status}`,
        ),
        el(
          "div",
          { class: "meta" },
          Object.entries(study.counts)
            .filter(([, n]) => n > 0)
            .map(([state, n]) => `${n} ${state}`)
            .join(", ") || "empty",
        ),
      ),
    );
    this.root.replaceChildren(
      el("h1", {}, "pipebench studies"),
      el("div", { class: "cards" }, ...(cards.length ? cards : ["no studies found"])),
    );
  }

  private async renderStudy(studyId: string): Promise<void> {
    const study = await this.api.study(studyId);
    const header = this.studyHeader(study);
    const controls = this.controls(study);
    const tabs = this.tabBar();
    const content = el("div", { class: "content" });
    this.root.replaceChildren(header, controls, tabs, content);

    await this.renderTab(study, content);

    if (this.state.trial !== null) {
      content.append(await this.trialPanel(study));
    }
    if (this.state.live) {
      this.startLive(study, content);
    }
  }

  private studyHeader(study: StudyDetail): HTMLElement {
    const pruner = study.pruner ? ` · pruner ${formatValue(study.pruner.type ?? null)}` : "";
    const sampler = study.sampler ? ` · sampler ${formatValue(study.sampler.type ?? null)}` : "";
    return el(
      "header",
      {},
      el("a", { href: "#/", class: "back" }, "← studies"),
      el("h1", {}, study.id),
      el(
        "div",
        { class: "meta" },
        `${study.mode} · ${study.direction} ${study.metric}${sampler}${pruner} · ` +
          Object.entries(study.counts)
            .filter(([, n]) => n > 0)
            .map(([state, n]) => `${n} ${state}`)
            .join(", "),
      ),
    );
  }

  private controls(study: StudyDetail): HTMLElement {
    const numericish = ["trial_id", "final_value", "last_value", "steps", "seed"];
    const columns = [...numericish, ...study.param_names];
    const filterInput = el("input", {
      type: "text",
      value: this.state.filter,
      placeholder: "filter: aggregator=attention,lr>=0.3",
      change: (event) => this.push({ filter: (event.target as HTMLInputElement).value }),
    });
    const select = (
      current: string,
      options: string[],
      allowEmpty: string | null,
      apply: (value: string) => void,
    ) => {
      const element = el("select", {
        change: (event) => apply((event.target as HTMLSelectElement).value),
      });
      if (allowEmpty !== null) {
        element.append(el("option", { value: "" }, allowEmpty));
      }
      for (const option of options) {
        const attrs: Attrs = { value: option };
        if (option === current) attrs.selected = true;
        element.append(el("option", attrs, option));
      }
      return element;
    };
    return el(
      "div",
      { class: "controls" },
      el("label", {}, "filter ", filterInput),
      el(
        "label",
        {},
        "group by ",
        select(this.state.groupBy, study.param_names.concat(["state", "bracket"]), "(none)", (value) =>
          this.push({ groupBy: value }),
        ),
      ),
      el(
        "label",
        {},
        "agg ",
        select(this.state.agg, ["mean", "std", "median", "count", "best"], null, (value) =>
          this.push({ agg: value }),
        ),
      ),
      el(
        "label",
        {},
        "x ",
        select(this.state.x, columns, null, (value) => this.push({ x: value })),
      ),
      el(
        "label",
        {},
        "y ",
        select(this.state.y, columns, null, (value) => this.push({ y: value })),
      ),
      el(
        "label",
        {},
        "color ",
        select(this.state.color, study.param_names.concat(["state"]), "(none)", (value) =>
          this.push({ color: value }),
        ),
      ),
      el(
        "label",
        { class: "live" },
        el("input", {
          type: "checkbox",
          ...(this.state.live ? { checked: true } : {}),
          change: (event) =>
            this.push({ live: (event.target as HTMLInputElement).checked }),
        }),
        " live",
      ),
      el("button", { click: () => this.exportCsv() }, "download CSV"),
      el("button", { click: () => this.exportSvg() }, "export figure"),
    );
  }

  private tabBar(): HTMLElement {
    const tabs: Tab[] = ["leaderboard", "table", "scatter", "parcoords", "progress"];
    return el(
      "nav",
      { class: "tabs" },
      ...tabs.map((tab) =>
        el(
          "a",
          {
            class: tab === this.state.tab ? "tab active" : "tab",
            href: encodeState({ ...this.state, tab }),
          },
          tab,
        ),
      ),
    );
  }

  private async renderTab(study: StudyDetail, content: HTMLElement): Promise<void> {
    this.currentSvg = null;
    if (this.state.tab === "leaderboard") {
      if (this.state.groupBy) {
        const grouped = await this.api.grouped(study.id, {
          filter: this.state.filter,
          groupBy: this.state.groupBy,
          agg: this.state.agg,
        });
        content.append(this.table(groupedModel(grouped)));
      } else {
        const board = await this.api.leaderboard(study.id, this.state.k);
        this.lastRows = { columns: board.columns, rows: board.rows };
        content.append(this.table(leaderboardModel(board, study.param_names), true));
      }
      return;
    }
    if (this.state.tab === "table") {
      const trials = await this.api.trials(study.id, { filter: this.state.filter });
      const rows = this.sortColumn
        ? sortRows(trials.rows, this.sortColumn, this.sortDescending)
        : trials.rows;
      this.lastRows = { columns: trials.columns, rows };
      content.append(this.table(trialsTableModel({ columns: trials.columns, rows }), true));
      return;
    }
    if (this.state.tab === "scatter") {
      const plot = await this.api.plot(study.id, {
        x: this.state.x,
        y: this.state.y,
        groupBy: this.state.color || undefined,
      });
      content.append(this.scatter(plot));
      return;
    }
    if (this.state.tab === "parcoords") {
      const trials = await this.api.trials(study.id, { filter: this.state.filter });
      content.append(this.parcoords(trials.rows, study));
      return;
    }
    const plot = await this.api.plot(study.id, {
      x: "trial_id",
      y: "last_value",
      transform: "best_so_far",
    });
    content.append(this.progress(plot));
  }

  private table(model: TableModel, sortable = false): HTMLElement {
    const head = el(
      "tr",
      {},
      ...model.columns.map((column) =>
        el(
          "th",
          sortable
            ? {
                class: "sortable",
                click: () => {
                  this.sortDescending =
                    this.sortColumn === column ? !this.sortDescending : false;
                  this.sortColumn = column;
                  void this.render();
                },
              }
            : {},
          column,
        ),
      ),
    );
    const body = model.rows.map((row) =>
      el(
        "tr",
        {
          class: row.state === "pruned" ? "pruned" : row.state === "failed" ? "failed" : "",
          ...(row.trialId !== null
            ? { click: () => this.push({ trial: row.trialId }) }
            : {}),
        },
        ...row.cells.map((cell) => el("td", {}, cell)),
      ),
    );
    return el(
      "div",
      { class: "table-wrap" },
      el("table", {}, el("thead", {}, head), el("tbody", {}, ...body)),
    );
  }

  private plotFrame(width: number, height: number): SVGSVGElement {
    const element = svg("svg", {
      viewBox: `0 0 ${width} ${height}`,
      width,
      height,
      class: "plot",
    }) as SVGSVGElement;
    this.currentSvg = element;
    return element;
  }

  private scatter(plot: PlotResponse): HTMLElement {
    const width = 760;
    const height = 420;
    const model = scatterModel(plot, width, height);
    const element = this.plotFrame(width, height);
    const [r0, r1] = model.yScale.range;
    for (const tick of model.yScale.ticks()) {
      const y = model.yScale.toPixel(tick);
      element.append(svg("line", { x1: PLOT_MARGIN.left, x2: width - PLOT_MARGIN.right, y1: y, y2: y, class: "grid" }));
      const label = svg("text", { x: PLOT_MARGIN.left - 6, y: y + 4, class: "tick", "text-anchor": "end" });
      label.textContent = shortNumber(tick);
      element.append(label);
    }
    const xTicks = model.xCategories
      ? model.xCategories.map((c, i) => ({ v: i, text: c }))
      : model.xScale.ticks().map((t) => ({ v: t, text: shortNumber(t) }));
    for (const tick of xTicks) {
      const x = model.xScale.toPixel(tick.v);
      const label = svg("text", { x, y: height - PLOT_MARGIN.bottom + 18, class: "tick", "text-anchor": "middle" });
      label.textContent = tick.text;
      element.append(label);
    }
    element.append(
      svg("line", { x1: PLOT_MARGIN.left, x2: width - PLOT_MARGIN.right, y1: r0, y2: r0, class: "axis" }),
      svg("line", { x1: PLOT_MARGIN.left, x2: PLOT_MARGIN.left, y1: r0, y2: r1, class: "axis" }),
    );
    const seriesColor = new Map(model.seriesLabels.map((label, i) => [label, PALETTE[i % PALETTE.length]]));
    for (const point of model.points) {
      const circle = svg("circle", {
        cx: point.cx,
        cy: point.cy,
        r: 4,
        fill: seriesColor.get(point.series) ?? PALETTE[0],
        class: "dot",
      });
      circle.append(svg("title"));
      circle.lastChild!.textContent = `${point.series}: (${formatValue(point.x)}, ${point.y})`;
      element.append(circle);
    }
    const legend = el(
      "div",
      { class: "legend" },
      ...model.seriesLabels.map((label) =>
        el(
          "span",
          {},
          el("i", { style: `background:${seriesColor.get(label)}` } as unknown as Attrs),
          ` ${label}`,
        ),
      ),
    );
    return el("div", {}, element as unknown as Node, legend);
  }

  private parcoords(rows: Row[], study: StudyDetail): HTMLElement {
    const columns = study.param_names;
    const model = parcoordsModel(rows, columns, "final_value");
    const width = Math.max(760, columns.length * 140);
    const height = 420;
    const top = 28;
    const bottom = height - 40;
    const element = this.plotFrame(width, height);
    const axisX = (i: number) =>
      columns.length === 1
        ? width / 2
        : 60 + (i * (width - 120)) / (columns.length - 1);
    model.axes.forEach((axis, i) => {
      const x = axisX(i);
      element.append(svg("line", { x1: x, x2: x, y1: top, y2: bottom, class: "axis" }));
      const title = svg("text", { x, y: top - 10, class: "tick", "text-anchor": "middle" });
      title.textContent = axis.name;
      element.append(title);
      const labels =
        axis.kind === "categorical"
          ? (axis.categories as string[]).map((c, j, arr) => ({
              t: arr.length === 1 ? 0.5 : j / (arr.length - 1),
              text: c,
            }))
          : [
              { t: 0, text: shortNumber((axis.numericDomain as [number, number])[0]) },
              { t: 1, text: shortNumber((axis.numericDomain as [number, number])[1]) },
            ];
      for (const { t, text } of labels) {
        const label = svg("text", {
          x: x + 4,
          y: bottom - t * (bottom - top) + 4,
          class: "tick small",
        });
        label.textContent = text;
        element.append(label);
      }
    });
    for (const line of model.lines) {
      const segments: string[] = [];
      line.positions.forEach((position, i) => {
        if (position === null) return;
        const x = axisX(i);
        const y = bottom - position * (bottom - top);
        segments.push(`${segments.length ? "L" : "M"}${x},${y}`);
      });
      if (!segments.length) continue;
      element.append(
        svg("path", {
          d: segments.join(" "),
          class: line.state === "pruned" ? "line pruned-line" : "line",
          stroke: metricColor(line.metric, model.metricDomain),
        }),
      );
    }
    return el("div", { class: "scroll-x" }, element as unknown as Node);
  }

  private progress(plot: PlotResponse): HTMLElement {
    const points = progressPoints(plot);
    const width = 760;
    const height = 360;
    const model = scatterModel(
      { x: plot.x, y: plot.y, series: [{ label: "best so far", points }] },
      width,
      height,
    );
    const element = this.plotFrame(width, height);
    const path = model.points
      .map((p, i) => `${i ? "L" : "M"}${p.cx},${p.cy}`)
      .join(" ");
    for (const tick of model.yScale.ticks()) {
      const y = model.yScale.toPixel(tick);
      const label = svg("text", { x: PLOT_MARGIN.left - 6, y: y + 4, class: "tick", "text-anchor": "end" });
      label.textContent = shortNumber(tick);
      element.append(
        svg("line", { x1: PLOT_MARGIN.left, x2: width - PLOT_MARGIN.right, y1: y, y2: y, class: "grid" }),
        label,
      );
    }
    element.append(svg("path", { d: path, class: "line bold", stroke: PALETTE[0] }));
    for (const point of model.points) {
      element.append(svg("circle", { cx: point.cx, cy: point.cy, r: 3, fill: PALETTE[0] }));
    }
    return el("div", {}, element as unknown as Node);
  }

  private async trialPanel(study: StudyDetail): Promise<HTMLElement> {
    const detail = await this.api.trial(study.id, this.state.trial as number);
    const model = trialCurveModel(detail);
    const width = 560;
    const height = 260;
    const curve = this.curveSvg(model, width, height);
    const configRows = Object.entries(detail.config).map(([key, value]) =>
      el("tr", {}, el("td", {}, key), el("td", {}, formatValue(value))),
    );
    return el(
      "aside",
      { class: "trial-panel" },
      el(
        "h2",
        {},
        `trial ${detail.trial_id} `,
        el("span", { class: `badge ${detail.state}` }, detail.state),
        el("button", { class: "close", click: () => this.push({ trial: null }) }, "×"),
      ),
      el(
        "div",
        { class: "meta" },
        `seed ${detail.seed}` +
          (detail.bracket !== null ? ` · bracket ${detail.bracket}` : "") +
          (detail.final_value !== null ? ` · final ${formatValue(detail.final_value)}` : "") +
          (detail.error ? ` · ${detail.error}` : ""),
      ),
      curve as unknown as Node,
      el("table", { class: "config" }, ...configRows),
    );
  }

  private curveSvg(model: CurveModel, width: number, height: number): SVGSVGElement {
    const element = svg("svg", {
      viewBox: `0 0 ${width} ${height}`,
      width,
      height,
      class: "plot",
    }) as SVGSVGElement;
    if (!model.points.length) return element;
    const response = {
      x: "step",
      y: "value",
      series: [{ label: "curve", points: model.points as [Value, number][] }],
    };
    const scatter = scatterModel(response, width, height, { top: 12, right: 12, bottom: 28, left: 48 });
    for (const rung of model.rungs) {
      const x = scatter.xScale.toPixel(rung);
      if (x < scatter.xScale.range[0] || x > scatter.xScale.range[1]) continue;
      element.append(svg("line", { x1: x, x2: x, y1: 12, y2: height - 28, class: "rung" }));
      const label = svg("text", { x, y: height - 14, class: "tick small", "text-anchor": "middle" });
      label.textContent = String(rung);
      element.append(label);
    }
    const path = scatter.points.map((p, i) => `${i ? "L" : "M"}${p.cx},${p.cy}`).join(" ");
    element.append(
      svg("path", {
        d: path,
        class: model.pruned ? "line pruned-line bold" : "line bold",
        stroke: model.pruned ? "#dc2626" : PALETTE[0],
      }),
    );
    return element;
  }

  private exportCsv(): void {
    if (!this.lastRows) return;
    downloadText(
      `${this.state.study ?? "study"}-${this.state.tab}.csv`,
      rowsToCsv(this.lastRows.columns, this.lastRows.rows),
      "text/csv",
    );
  }

  private exportSvg(): void {
    if (!this.currentSvg) return;
    downloadText(
      `${this.state.study ?? "study"}-${this.state.tab}.svg`,
      serializeSvg(this.currentSvg),
      "image/svg+xml",
    );
  }

  private startLive(study: StudyDetail, content: HTMLElement): void {
    this.cursor = { seq: 0 };
    this.poll = startPolling(async () => {
      const response = await this.api.events(study.id, this.cursor.seq);
      const update = advanceCursor(this.cursor, response);
      if (update.stale) return;
      const first = this.cursor.seq === 0;
      this.cursor = update.cursor;
      if (update.fresh && !first) {
        content.replaceChildren();
        const fresh = await this.api.study(study.id);
        await this.renderTab(fresh, content);
      }
    }, 2000);
  }

  private stopPolling(): void {
    if (this.poll) {
      this.poll.stop();
      this.poll = null;
    }
  }
}

const mount = document.getElementById("app");
if (mount) {
  const app = new App(mount);
  void app.render();
}
