import {
  EventsResponse,
  GroupedResponse,
  LeaderboardResponse,
  PlotResponse,
  StudiesResponse,
  StudyDetail,
  TrialDetail,
  TrialsResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

type Params = Record<string, string | number | undefined>;

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async get<T>(path: string, params?: Params): Promise<T> {
    const search = new URLSearchParams();
    for (const [key, value] of Object.entries(params ?? {})) {
      if (value !== undefined && value !== "") search.set(key, String(value));
    }
    const query = search.toString();
    const response = await fetch(`${this.base}${path}${query ? "?" + query : ""}`);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, body && (body as { detail?: unknown }).detail);
    }
    return body as T;
  }

  studies(): Promise<StudiesResponse> {
    return this.get("/api/studies");
  }

  study(id: string): Promise<StudyDetail> {
    return this.get(`/api/studies/${encodeURIComponent(id)}`);
  }

  trials(id: string, opts: { filter?: string } = {}): Promise<TrialsResponse> {
    return this.get(`/api/studies/${encodeURIComponent(id)}/trials`, {
      filter: opts.filter,
    });
  }

  grouped(
    id: string,
    opts: { filter?: string; groupBy: string; agg: string; metric?: string },
  ): Promise<GroupedResponse> {
    return this.get(`/api/studies/${encodeURIComponent(id)}/trials`, {
      filter: opts.filter,
      group_by: opts.groupBy,
      agg: opts.agg,
      metric: opts.metric,
    });
  }

  leaderboard(id: string, k: number): Promise<LeaderboardResponse> {
    return this.get(`/api/studies/${encodeURIComponent(id)}/leaderboard`, { k });
  }

  plot(
    id: string,
    opts: { x: string; y: string; groupBy?: string; transform?: string },
  ): Promise<PlotResponse> {
    return this.get(`/api/studies/${encodeURIComponent(id)}/plot`, {
      x: opts.x,
      y: opts.y,
      group_by: opts.groupBy,
      transform: opts.transform,
    });
  }

  trial(id: string, trialId: number): Promise<TrialDetail> {
    return this.get(`/api/studies/${encodeURIComponent(id)}/trials/${trialId}`);
  }

  events(id: string, since: number): Promise<EventsResponse> {
    return this.get(`/api/studies/${encodeURIComponent(id)}/events`, { since });
  }
}
