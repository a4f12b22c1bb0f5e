import { HttpApiClient } from "./api";
import { Explorer } from "./state";
import { ANY_ICD10_YEAR } from "./types";
import { render } from "./view";

// Entry point; the API base URL comes from ?api=... (same origin default).

function baseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return (fromQuery ?? "").replace(/\/$/, "");
}

function start(): void {
  const root = document.getElementById("app");
  if (root === null) {
    throw new Error("missing #app container");
  }
  const explorer = new Explorer(new HttpApiClient(baseUrl()));
  const actions = {
    onDrill: (nodeId: string) => void explorer.drill(nodeId),
    onRollUp: () => void explorer.rollUp(),
    onSearch: (q: string) => void explorer.search(q),
    onProbe: (nodeId: string | null) => explorer.probe(nodeId),
    onHighlight: (nodeId: string) => explorer.highlight(nodeId),
  };
  explorer.subscribe((state) => render(root, state, actions));
  void explorer.loadSummary();
  void explorer.runQuery(ANY_ICD10_YEAR);
}

start();
