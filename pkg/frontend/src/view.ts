import { DEFAULT_PLOT, layoutScatter, type PlotConfig } from "./layout";
import type { ExplorerState } from "./state";
import type { CohortSummary, ScatterPoint } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ViewActions {
  onDrill(nodeId: string): void;
  onRollUp(): void;
  onSearch(q: string): void;
  onProbe(nodeId: string | null): void;
  onHighlight(nodeId: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function formatPercent(fraction: number): string {
  return `${Math.round(fraction * 100)}%`;
}

function attributeSection(
  doc: Document,
  title: string,
  counts: Record<string, number>,
  total: number,
): HTMLElement {
  const section = el(doc, "section", "attribute");
  section.appendChild(el(doc, "h3", undefined, title));
  const entries = Object.entries(counts);
  if (entries.length === 0) {
    section.appendChild(el(doc, "p", "empty", "no data"));
    return section;
  }
  for (const [category, count] of entries) {
    const share = total > 0 ? count / total : 0;
    const row = el(doc, "div", "attribute-row");
    row.appendChild(el(doc, "span", "attribute-name", category));
    const bar = el(doc, "div", "attribute-bar");
    const fill = el(doc, "div", "attribute-fill");
    fill.style.width = `${(share * 100).toFixed(1)}%`;
    bar.appendChild(fill);
    row.appendChild(bar);
    row.appendChild(
      el(doc, "span", "attribute-count", `${count} (${formatPercent(share)})`),
    );
    section.appendChild(row);
  }
  return section;
}

export function renderSummary(
  doc: Document,
  summary: CohortSummary | null,
): HTMLElement {
  const sidebar = el(doc, "aside", "sidebar");
  sidebar.appendChild(el(doc, "h2", undefined, "Attributes"));
  if (summary === null) {
    sidebar.appendChild(el(doc, "p", "empty", "no cohort loaded"));
    return sidebar;
  }
  sidebar.appendChild(
    el(doc, "p", "cohort-size", `${summary.size} patients`),
  );
  sidebar.appendChild(
    el(
      doc,
      "p",
      "prevalence",
      `${formatPercent(summary.prevalence)} COVID positive`,
    ),
  );
  sidebar.appendChild(attributeSection(doc, "Gender", summary.gender, summary.size));
  sidebar.appendChild(
    attributeSection(doc, "Ethnicity", summary.ethnicity, summary.size),
  );
  sidebar.appendChild(attributeSection(doc, "Race", summary.race, summary.size));
  sidebar.appendChild(
    attributeSection(doc, "Age", summary.age_decades, summary.size),
  );
  return sidebar;
}

function axis(doc: Document, cfg: PlotConfig): SVGGElement {
  const g = doc.createElementNS(SVG_NS, "g") as SVGGElement;
  g.setAttribute("class", "axes");
  const bottom = cfg.height - cfg.marginBottom;
  const xLine = doc.createElementNS(SVG_NS, "line");
  xLine.setAttribute("x1", String(cfg.marginLeft));
  xLine.setAttribute("x2", String(cfg.width - cfg.marginRight));
  xLine.setAttribute("y1", String(bottom));
  xLine.setAttribute("y2", String(bottom));
  xLine.setAttribute("class", "axis-line");
  g.appendChild(xLine);
  const midX = (cfg.marginLeft + cfg.width - cfg.marginRight) / 2;
  const zero = doc.createElementNS(SVG_NS, "line");
  zero.setAttribute("x1", String(midX));
  zero.setAttribute("x2", String(midX));
  zero.setAttribute("y1", String(cfg.marginTop));
  zero.setAttribute("y2", String(bottom));
  zero.setAttribute("class", "zero-line");
  g.appendChild(zero);
  const ticks: Array<[number, string]> = [
    [cfg.marginLeft, "-1"],
    [midX, "0"],
    [cfg.width - cfg.marginRight, "+1"],
  ];
  for (const [x, label] of ticks) {
    const text = doc.createElementNS(SVG_NS, "text");
    text.setAttribute("x", String(x));
    text.setAttribute("y", String(bottom + 16));
    text.setAttribute("class", "tick");
    text.setAttribute("text-anchor", "middle");
    text.textContent = label;
    g.appendChild(text);
  }
  const caption = doc.createElementNS(SVG_NS, "text");
  caption.setAttribute("x", String(midX));
  caption.setAttribute("y", String(bottom + 32));
  caption.setAttribute("class", "axis-caption");
  caption.setAttribute("text-anchor", "middle");
  caption.textContent =
    "correlation with outcome (right = COVID-positive associated)";
  g.appendChild(caption);
  const yCaption = doc.createElementNS(SVG_NS, "text");
  yCaption.setAttribute("x", "12");
  yCaption.setAttribute("y", String(cfg.marginTop + 8));
  yCaption.setAttribute("class", "axis-caption");
  yCaption.textContent = "share of patients";
  g.appendChild(yCaption);
  return g;
}

export function renderScatter(
  doc: Document,
  state: ExplorerState,
  actions: ViewActions,
  cfg: PlotConfig = DEFAULT_PLOT,
): SVGSVGElement {
  const svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  svg.setAttribute("class", "scatter");
  svg.setAttribute("width", String(cfg.width));
  svg.setAttribute("height", String(cfg.height));
  svg.setAttribute("viewBox", `0 0 ${cfg.width} ${cfg.height}`);
  svg.appendChild(axis(doc, cfg));
  for (const dot of layoutScatter(state.points, cfg)) {
    if (dot.triangleWidth > 0) {
      const triangle = doc.createElementNS(SVG_NS, "polygon");
      const top = dot.y + dot.radius + 2;
      const half = dot.triangleWidth / 2;
      triangle.setAttribute(
        "points",
        `${dot.x - half},${top} ${dot.x + half},${top} ${dot.x},${top + 8}`,
      );
      triangle.setAttribute("class", "scent");
      triangle.setAttribute("data-node-id", dot.nodeId);
      svg.appendChild(triangle);
    }
    const circle = doc.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(dot.x));
    circle.setAttribute("cy", String(dot.y));
    circle.setAttribute("r", String(dot.radius));
    circle.setAttribute("data-node-id", dot.nodeId);
    const classes = ["dot"];
    if (dot.expandable) {
      classes.push("expandable");
    }
    if (state.highlighted === dot.nodeId) {
      classes.push("highlighted");
    }
    circle.setAttribute("class", classes.join(" "));
    circle.addEventListener("click", () => {
      if (dot.expandable) {
        actions.onDrill(dot.nodeId);
      }
    });
    circle.addEventListener("mouseenter", () => actions.onProbe(dot.nodeId));
    circle.addEventListener("mouseleave", () => actions.onProbe(null));
    svg.appendChild(circle);
  }
  return svg;
}

export function renderTooltip(
  doc: Document,
  state: ExplorerState,
): HTMLElement | null {
  if (state.probed === null) {
    return null;
  }
  const point =
    state.points.find((p) => p.node_id === state.probed) ??
    state.searchResults.find((p) => p.node_id === state.probed);
  if (point === undefined) {
    return null;
  }
  const tip = el(doc, "div", "tooltip");
  tip.appendChild(el(doc, "strong", undefined, point.label));
  tip.appendChild(
    el(doc, "div", undefined, `support ${formatPercent(point.support)}`),
  );
  tip.appendChild(
    el(doc, "div", undefined, `correlation ${point.correlation.toFixed(3)}`),
  );
  tip.appendChild(
    el(doc, "div", undefined, `${point.patient_count} patients`),
  );
  return tip;
}

function renderBreadcrumbs(
  doc: Document,
  state: ExplorerState,
  actions: ViewActions,
): HTMLElement {
  const nav = el(doc, "nav", "breadcrumbs");
  nav.appendChild(el(doc, "span", "crumb crumb-root", "overview"));
  for (const crumb of state.breadcrumbs) {
    nav.appendChild(el(doc, "span", "crumb-sep", "›"));
    nav.appendChild(el(doc, "span", "crumb", crumb.label));
  }
  if (state.breadcrumbs.length > 0) {
    const back = el(doc, "button", "rollup-button", "roll up");
    back.addEventListener("click", () => actions.onRollUp());
    nav.appendChild(back);
  }
  return nav;
}

function renderSearch(
  doc: Document,
  state: ExplorerState,
  actions: ViewActions,
): HTMLElement {
  const box = el(doc, "div", "search");
  const input = el(doc, "input", "search-input");
  input.setAttribute("type", "search");
  input.setAttribute("placeholder", "search event types (e.g. vent)");
  input.value = state.searchQuery;
  input.addEventListener("input", () => actions.onSearch(input.value));
  box.appendChild(input);
  const list = el(doc, "ul", "search-results");
  if (state.searchQuery !== "" && state.searchResults.length === 0) {
    list.appendChild(el(doc, "li", "empty", "no results"));
  }
  for (const row of state.searchResults) {
    const item = el(doc, "li", "search-result");
    item.setAttribute("data-node-id", row.node_id);
    item.appendChild(el(doc, "span", "search-label", row.label));
    item.appendChild(
      el(
        doc,
        "span",
        "search-stats",
        `support ${formatPercent(row.support)}, ` +
          `corr ${row.correlation.toFixed(3)}`,
      ),
    );
    item.addEventListener("click", () => actions.onHighlight(row.node_id));
    list.appendChild(item);
  }
  box.appendChild(list);
  return box;
}

/** Render the whole explorer into the root element (replaces content). */
export function render(
  root: HTMLElement,
  state: ExplorerState,
  actions: ViewActions,
  cfg: PlotConfig = DEFAULT_PLOT,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const layout = el(doc, "div", "explorer");
  layout.appendChild(renderSummary(doc, state.summary));
  const main = el(doc, "main", "plot-area");
  const status = el(
    doc,
    "p",
    "query-status",
    state.sessionId === null
      ? "no query yet"
      : `${state.matched} matched, ${state.unmatched} unmatched` +
          (state.busy ? " — working…" : ""),
  );
  main.appendChild(status);
  if (state.error !== null) {
    main.appendChild(el(doc, "p", "error", state.error));
  }
  main.appendChild(renderBreadcrumbs(doc, state, actions));
  main.appendChild(renderScatter(doc, state, actions, cfg));
  const tooltip = renderTooltip(doc, state);
  if (tooltip !== null) {
    main.appendChild(tooltip);
  }
  main.appendChild(renderSearch(doc, state, actions));
  layout.appendChild(main);
  root.appendChild(layout);
}
