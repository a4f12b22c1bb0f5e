// UI acceptance: the wired explorer (state machine + DOM renderer) against
// a fixture server built from recorded analytics responses.

import { beforeEach, describe, expect, it } from "vitest";

import { plotCenterX } from "../src/layout";
import { Explorer } from "../src/state";
import { ANY_ICD10_YEAR } from "../src/types";
import { render, type ViewActions } from "../src/view";
import { FixtureApi, HIGH_NODE } from "./fixture_client";

let root: HTMLElement;
let explorer: Explorer;
let api: FixtureApi;

function wire(): ViewActions {
  return {
    onDrill: (nodeId) => void explorer.drill(nodeId),
    onRollUp: () => void explorer.rollUp(),
    onSearch: (q) => void explorer.search(q),
    onProbe: (nodeId) => explorer.probe(nodeId),
    onHighlight: (nodeId) => explorer.highlight(nodeId),
  };
}

async function settle(): Promise<void> {
  // queued mutations chain promises; two microtask hops flush one request
  for (let i = 0; i < 8; i++) {
    await Promise.resolve();
  }
}

beforeEach(async () => {
  document.body.innerHTML = "<div id='app'></div>";
  root = document.getElementById("app")!;
  api = new FixtureApi();
  explorer = new Explorer(api);
  const actions = wire();
  explorer.subscribe((state) => render(root, state, actions));
  await explorer.loadSummary();
  await explorer.runQuery(ANY_ICD10_YEAR);
});

function dotById(nodeId: string): Element {
  const dot = [...root.querySelectorAll("circle.dot")].find(
    (c) => c.getAttribute("data-node-id") === nodeId,
  );
  expect(dot).toBeDefined();
  return dot!;
}

function snapshotDots(): Array<Record<string, string | null>> {
  return [...root.querySelectorAll("circle.dot")].map((c) => ({
    id: c.getAttribute("data-node-id"),
    cx: c.getAttribute("cx"),
    cy: c.getAttribute("cy"),
    cls: c.getAttribute("class"),
  }));
}

describe("criterion 9: explorer against the fixture server", () => {
  it("renders the summary sidebar with the reconstructed cohort figures", () => {
    const sidebar = root.querySelector(".sidebar")!;
    expect(sidebar.textContent).toContain("998 patients");
    expect(sidebar.textContent).toContain("79% COVID positive");
    expect(sidebar.textContent).toContain("599 (60%)"); // female share
  });

  it("clicking the lab's HIGH dot drills down to subtype dots on opposite "
     + "x half-planes", async () => {
    const high = dotById(HIGH_NODE);
    expect(high.getAttribute("class")).toContain("expandable");
    high.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    await settle();

    expect(api.calls).toContainEqual([
      "drilldown",
      api.calls.find((c) => c[0] === "drilldown")![1],
      HIGH_NODE,
    ]);
    const raw = dotById(`${HIGH_NODE}:RAW`);
    const local = dotById(`${HIGH_NODE}:LOCAL_IMPUTED`);
    const global = dotById(`${HIGH_NODE}:GLOBAL_IMPUTED`);
    const center = plotCenterX();
    expect(Number(raw.getAttribute("cx"))).toBeGreaterThan(center);
    expect(Number(local.getAttribute("cx"))).toBeGreaterThan(center);
    expect(Number(global.getAttribute("cx"))).toBeLessThan(center);
  });

  it("drill-down followed by roll-up restores the prior plot exactly", async () => {
    const before = snapshotDots();
    dotById(HIGH_NODE).dispatchEvent(new MouseEvent("click", { bubbles: true }));
    await settle();
    expect(snapshotDots()).not.toEqual(before);

    const rollup = root.querySelector("button.rollup-button")!;
    rollup.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    await settle();
    expect(snapshotDots()).toEqual(before);
    expect(root.querySelector("button.rollup-button")).toBeNull();
  });
});
