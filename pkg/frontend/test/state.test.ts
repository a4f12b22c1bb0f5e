import { describe, expect, it } from "vitest";

import { layoutScatter, plotCenterX } from "../src/layout";
import { Explorer } from "../src/state";
import { ANY_ICD10_YEAR } from "../src/types";
import { FixtureApi, HIGH_NODE, fixtures } from "./fixture_client";

async function openExplorer() {
  const api = new FixtureApi();
  const explorer = new Explorer(api);
  await explorer.loadSummary();
  await explorer.runQuery(ANY_ICD10_YEAR);
  return { api, explorer };
}

describe("initialization", () => {
  it("loads the cohort summary figures", async () => {
    const { explorer } = await openExplorer();
    const summary = explorer.getState().summary!;
    expect(summary.size).toBe(998);
    expect(summary.positives).toBe(788);
    expect(Math.round(summary.prevalence * 100)).toBe(79);
    expect(summary.gender.female).toBe(599);
    expect(Math.round((summary.gender.female / summary.size) * 100)).toBe(60);
  });

  it("runs the query and shows the current cut", async () => {
    const { api, explorer } = await openExplorer();
    const state = explorer.getState();
    expect(state.sessionId).toBe(fixtures.query.session_id);
    expect(state.matched).toBe(fixtures.query.matched);
    expect(state.points).toEqual(fixtures.scatterHigh.points);
    expect(api.calls.map((c) => c[0])).toEqual([
      "cohortSummary",
      "runQuery",
      "scatter",
    ]);
  });
});

describe("drill-down on the high-results dot", () => {
  it("issues the drilldown request and re-renders the subtype dots on "
     + "opposite half-planes", async () => {
    const { api, explorer } = await openExplorer();
    const highPoint = explorer
      .getState()
      .points.find((p) => p.node_id === HIGH_NODE)!;
    expect(highPoint.has_children).toBe(true);
    expect(highPoint.scent).toBeGreaterThan(0.3);

    await explorer.drill(HIGH_NODE);
    expect(api.calls).toContainEqual([
      "drilldown",
      fixtures.query.session_id,
      HIGH_NODE,
    ]);
    const state = explorer.getState();
    expect(state.points).toEqual(fixtures.drillHigh.points);
    expect(state.breadcrumbs.map((c) => c.nodeId)).toEqual([HIGH_NODE]);

    const dots = layoutScatter(state.points);
    const center = plotCenterX();
    const raw = dots.find((d) => d.nodeId === `${HIGH_NODE}:RAW`)!;
    const global = dots.find(
      (d) => d.nodeId === `${HIGH_NODE}:GLOBAL_IMPUTED`,
    )!;
    expect(raw.x).toBeGreaterThan(center);
    expect(global.x).toBeLessThan(center);
  });

  it("ignores clicks on dots without children", async () => {
    const { api, explorer } = await openExplorer();
    await explorer.drill(HIGH_NODE);
    const leaf = explorer
      .getState()
      .points.find((p) => !p.has_children)!;
    const callsBefore = api.calls.length;
    await explorer.drill(leaf.node_id);
    expect(api.calls.length).toBe(callsBefore);
    expect(explorer.getState().points).toEqual(fixtures.drillHigh.points);
    expect(explorer.getState().breadcrumbs.length).toBe(1);
  });
});

describe("roll-up", () => {
  it("restores the previous plot exactly", async () => {
    const { explorer } = await openExplorer();
    const before = explorer.getState().points;
    const dotsBefore = layoutScatter(before);

    await explorer.drill(HIGH_NODE);
    expect(explorer.getState().points).not.toEqual(before);
    await explorer.rollUp();

    const state = explorer.getState();
    expect(state.points).toEqual(before);
    expect(layoutScatter(state.points)).toEqual(dotsBefore);
    expect(state.breadcrumbs).toEqual([]);
  });

  it("is a no-op with nothing drilled", async () => {
    const { api, explorer } = await openExplorer();
    await explorer.rollUp();
    expect(api.calls.find((c) => c[0] === "rollup")).toBeUndefined();
  });
});

describe("mutation queueing", () => {
  it("serializes concurrent drill and roll-up clicks in order", async () => {
    const { api, explorer } = await openExplorer();
    const first = explorer.drill(HIGH_NODE);
    const second = explorer.rollUp();
    await Promise.all([first, second]);
    const mutations = api.calls.filter(
      (c) => c[0] === "drilldown" || c[0] === "rollup",
    );
    expect(mutations.map((c) => c[0])).toEqual(["drilldown", "rollup"]);
    expect(explorer.getState().points).toEqual(fixtures.scatterHigh.points);
    expect(explorer.getState().error).toBeNull();
  });
});

describe("search", () => {
  it("returns label matches with their statistics", async () => {
    const { explorer } = await openExplorer();
    await explorer.search("vent");
    const results = explorer.getState().searchResults;
    expect(results.length).toBeGreaterThan(0);
    for (const row of results) {
      expect(row.label.toLowerCase()).toContain("vent");
      expect(row.support).toBeGreaterThanOrEqual(0);
      expect(row.support).toBeLessThanOrEqual(1);
      expect(Math.abs(row.correlation)).toBeLessThanOrEqual(1);
    }
  });

  it("clears results on an empty query without calling the API", async () => {
    const { api, explorer } = await openExplorer();
    await explorer.search("");
    expect(explorer.getState().searchResults).toEqual([]);
    expect(api.calls.find((c) => c[0] === "search")).toBeUndefined();
  });
});
