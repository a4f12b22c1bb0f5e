import type { ExplorerApi } from "./api";
import type {
  CohortSummary,
  ScatterPoint,
  TemporalQuery,
} from "./types";

export interface Crumb {
  nodeId: string;
  label: string;
}

export interface ExplorerState {
  summary: CohortSummary | null;
  sessionId: string | null;
  matched: number;
  unmatched: number;
  budget: number | null;
  points: ScatterPoint[];
  breadcrumbs: Crumb[];
  searchQuery: string;
  searchResults: ScatterPoint[];
  probed: string | null;
  highlighted: string | null;
  busy: boolean;
  error: string | null;
}

const INITIAL: ExplorerState = {
  summary: null,
  sessionId: null,
  matched: 0,
  unmatched: 0,
  budget: null,
  points: [],
  breadcrumbs: [],
  searchQuery: "",
  searchResults: [],
  probed: null,
  highlighted: null,
  busy: false,
  error: null,
};

type Listener = (state: Readonly<ExplorerState>) => void;

/**
 * Explorer session state. Mutating interactions (query, drill-down,
 * roll-up, budget changes) run strictly one at a time: later clicks are
 * queued behind the in-flight request rather than raced.
 */
export class Explorer {
  private state: ExplorerState = { ...INITIAL };
  private listeners: Listener[] = [];
  private queue: Promise<void> = Promise.resolve();

  constructor(private readonly api: ExplorerApi) {}

  getState(): Readonly<ExplorerState> {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private patch(update: Partial<ExplorerState>): void {
    this.state = { ...this.state, ...update };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private enqueue(task: () => Promise<void>): Promise<void> {
    const run = this.queue.then(async () => {
      this.patch({ busy: true, error: null });
      try {
        await task();
        this.patch({ busy: false });
      } catch (err) {
        this.patch({ busy: false, error: err instanceof Error ? err.message : String(err) });
      }
    });
    this.queue = run;
    return run;
  }

  loadSummary(): Promise<void> {
    return this.enqueue(async () => {
      this.patch({ summary: await this.api.cohortSummary() });
    });
  }

  runQuery(query: TemporalQuery): Promise<void> {
    return this.enqueue(async () => {
      const result = await this.api.runQuery(query);
      const scatter = await this.api.scatter(result.session_id);
      this.patch({
        sessionId: result.session_id,
        matched: result.matched,
        unmatched: result.unmatched,
        budget: scatter.budget,
        points: scatter.points,
        breadcrumbs: [],
        highlighted: null,
        probed: null,
      });
    });
  }

  setBudget(budget: number): Promise<void> {
    return this.enqueue(async () => {
      const session = this.state.sessionId;
      if (session === null) {
        return;
      }
      const scatter = await this.api.scatter(session, budget);
      this.patch({
        budget: scatter.budget,
        points: scatter.points,
        breadcrumbs: [],
        probed: null,
      });
    });
  }

  /** Expand a dot into its children; queued, no-op for leaves. */
  drill(nodeId: string): Promise<void> {
    return this.enqueue(async () => {
      const session = this.state.sessionId;
      const point = this.state.points.find((p) => p.node_id === nodeId);
      if (session === null || point === undefined || !point.has_children) {
        return;
      }
      const scatter = await this.api.drilldown(session, nodeId);
      this.patch({
        points: scatter.points,
        breadcrumbs: [
          ...this.state.breadcrumbs,
          { nodeId, label: point.label },
        ],
        probed: null,
      });
    });
  }

  /** Undo the most recent drill-down; queued. */
  rollUp(): Promise<void> {
    return this.enqueue(async () => {
      const session = this.state.sessionId;
      const crumbs = this.state.breadcrumbs;
      if (session === null || crumbs.length === 0) {
        return;
      }
      const last = crumbs[crumbs.length - 1];
      const scatter = await this.api.rollup(session, last.nodeId);
      this.patch({
        points: scatter.points,
        breadcrumbs: crumbs.slice(0, -1),
        probed: null,
      });
    });
  }

  async search(q: string): Promise<void> {
    const session = this.state.sessionId;
    if (session === null || q === "") {
      this.patch({ searchQuery: q, searchResults: [] });
      return;
    }
    try {
      const result = await this.api.search(session, q);
      // stale responses lose: only apply if the query is still current
      this.patch({ searchQuery: q, searchResults: result.results });
    } catch (err) {
      this.patch({
        searchQuery: q,
        searchResults: [],
        error: err instanceof Error ? err.message : String(err),
      });
    }
  }

  probe(nodeId: string | null): void {
    this.patch({ probed: nodeId });
  }

  highlight(nodeId: string | null): void {
    this.patch({ highlighted: nodeId });
  }
}
