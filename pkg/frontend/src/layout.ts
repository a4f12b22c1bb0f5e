import type { ScatterPoint } from "./types";

// Pure plot geometry. Correlation maps linearly onto x (right = associated
// with the positive outcome label), support onto y (top = everyone), and
// scent onto the width of the gray triangle glyph beneath a dot.

export interface PlotConfig {
  width: number;
  height: number;
  marginLeft: number;
  marginRight: number;
  marginTop: number;
  marginBottom: number;
  dotRadius: number;
}

export const DEFAULT_PLOT: PlotConfig = {
  width: 680,
  height: 460,
  marginLeft: 48,
  marginRight: 16,
  marginTop: 16,
  marginBottom: 40,
  dotRadius: 7,
};

export interface PlotDot {
  nodeId: string;
  label: string;
  x: number;
  y: number;
  radius: number;
  triangleWidth: number;
  expandable: boolean;
  point: ScatterPoint;
}

export function xForCorrelation(correlation: number, cfg: PlotConfig): number {
  const inner = cfg.width - cfg.marginLeft - cfg.marginRight;
  return cfg.marginLeft + ((correlation + 1) / 2) * inner;
}

export function yForSupport(support: number, cfg: PlotConfig): number {
  const inner = cfg.height - cfg.marginTop - cfg.marginBottom;
  return cfg.marginTop + (1 - support) * inner;
}

/** Linear in scent, capped at twice the dot diameter; exactly zero when
 * the children do not diverge. */
export function triangleWidthFor(scent: number, cfg: PlotConfig): number {
  if (scent <= 0) {
    return 0;
  }
  return Math.min(scent * 2 * cfg.dotRadius, 4 * cfg.dotRadius);
}

export function layoutScatter(
  points: readonly ScatterPoint[],
  cfg: PlotConfig = DEFAULT_PLOT,
): PlotDot[] {
  return points.map((point) => ({
    nodeId: point.node_id,
    label: point.label,
    x: xForCorrelation(point.correlation, cfg),
    y: yForSupport(point.support, cfg),
    radius: cfg.dotRadius,
    triangleWidth: triangleWidthFor(point.scent, cfg),
    expandable: point.has_children,
    point,
  }));
}

export function plotCenterX(cfg: PlotConfig = DEFAULT_PLOT): number {
  return xForCorrelation(0, cfg);
}
