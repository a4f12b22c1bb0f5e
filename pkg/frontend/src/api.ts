import type {
  CohortSummary,
  QueryResult,
  ScatterResult,
  SearchResult,
  TemporalQuery,
} from "./types";

/** The analytics endpoints the explorer is allowed to call. */
export interface ExplorerApi {
  cohortSummary(): Promise<CohortSummary>;
  runQuery(query: TemporalQuery): Promise<QueryResult>;
  scatter(session: string, budget?: number): Promise<ScatterResult>;
  drilldown(session: string, nodeId: string): Promise<ScatterResult>;
  rollup(session: string, nodeId: string): Promise<ScatterResult>;
  search(session: string, q: string): Promise<SearchResult>;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class HttpApiClient implements ExplorerApi {
  private readonly fetchImpl: FetchLike;

  constructor(
    private readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    let body: unknown;
    try {
      body = await response.json();
    } catch {
      throw new ApiError(response.status, "malformed response body");
    }
    if (!response.ok) {
      const message =
        typeof body === "object" && body !== null && "error" in body
          ? String((body as { error: unknown }).error)
          : `request failed with status ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  cohortSummary(): Promise<CohortSummary> {
    return this.request("/cohort/summary");
  }

  runQuery(query: TemporalQuery): Promise<QueryResult> {
    return this.post("/query", query);
  }

  scatter(session: string, budget?: number): Promise<ScatterResult> {
    const params = new URLSearchParams({ session });
    if (budget !== undefined) {
      params.set("budget", String(budget));
    }
    return this.request(`/scatter?${params.toString()}`);
  }

  drilldown(session: string, nodeId: string): Promise<ScatterResult> {
    return this.post("/drilldown", { session, node_id: nodeId });
  }

  rollup(session: string, nodeId: string): Promise<ScatterResult> {
    return this.post("/rollup", { session, node_id: nodeId });
  }

  search(session: string, q: string): Promise<SearchResult> {
    const params = new URLSearchParams({ session, q });
    return this.request(`/search?${params.toString()}`);
  }
}
