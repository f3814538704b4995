/** Dependency-free SVG line charts.
 *
 * A series is a list of points or nulls; null entries break the line into
 * gaps (used for masked hazard cells). Rendering replaces the target's
 * content, so re-renders never accumulate stale nodes.
 */

export interface SeriesPoint {
  x: number;
  y: number;
}

export interface ChartSeries {
  label: string;
  color: string;
  points: Array<SeriesPoint | null>;
  dashed?: boolean;
}

export interface ChartMarker {
  x: number;
  label: string;
  color?: string;
}

export interface ChartOptions {
  width?: number;
  height?: number;
  xLabel?: string;
  yLabel?: string;
  markers?: ChartMarker[];
}

const SVG_NS = "http://www.w3.org/2000/svg";
const MARGIN = { top: 12, right: 12, bottom: 28, left: 48 };

function finiteExtent(values: number[]): [number, number] {
  if (values.length === 0) return [0, 1];
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === hi) {
    // widen a degenerate range so the scale stays invertible
    const pad = Math.max(Math.abs(lo) * 0.1, 1e-9);
    return [lo - pad, hi + pad];
  }
  return [lo, hi];
}

function svgEl<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

function ticks(lo: number, hi: number, count: number): number[] {
  const out: number[] = [];
  for (let i = 0; i <= count; i++) out.push(lo + ((hi - lo) * i) / count);
  return out;
}

function formatTick(v: number): string {
  if (v === 0) return "0";
  const mag = Math.abs(v);
  if (mag >= 10000 || mag < 0.01) return v.toExponential(1);
  if (mag >= 100) return v.toFixed(0);
  return v.toFixed(2).replace(/\.?0+$/, "");
}

export function renderChart(target: Element, series: ChartSeries[], options: ChartOptions = {}): SVGSVGElement {
  const doc = target.ownerDocument;
  const width = options.width ?? 640;
  const height = options.height ?? 280;

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of series) {
    for (const p of s.points) {
      if (p !== null && Number.isFinite(p.x) && Number.isFinite(p.y)) {
        xs.push(p.x);
        ys.push(p.y);
      }
    }
  }
  for (const m of options.markers ?? []) xs.push(m.x);
  const [x0, x1] = finiteExtent(xs);
  const [y0raw, y1] = finiteExtent(ys);
  const y0 = y0raw >= 0 ? 0 : y0raw; // anchor nonnegative axes at zero

  const sx = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * (width - MARGIN.left - MARGIN.right);
  const sy = (y: number) => height - MARGIN.bottom - ((y - y0) / (y1 - y0)) * (height - MARGIN.top - MARGIN.bottom);

  const svg = svgEl(doc, "svg", {
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    height: String(height),
    class: "chart",
  });

  // axes and ticks
  const axisColor = "#888";
  svg.appendChild(
    svgEl(doc, "line", {
      x1: String(MARGIN.left),
      y1: String(height - MARGIN.bottom),
      x2: String(width - MARGIN.right),
      y2: String(height - MARGIN.bottom),
      stroke: axisColor,
    }),
  );
  svg.appendChild(
    svgEl(doc, "line", {
      x1: String(MARGIN.left),
      y1: String(MARGIN.top),
      x2: String(MARGIN.left),
      y2: String(height - MARGIN.bottom),
      stroke: axisColor,
    }),
  );
  for (const t of ticks(x0, x1, 5)) {
    const label = svgEl(doc, "text", {
      x: String(sx(t)),
      y: String(height - MARGIN.bottom + 16),
      "text-anchor": "middle",
      class: "tick",
    });
    label.textContent = formatTick(t);
    svg.appendChild(label);
  }
  for (const t of ticks(y0, y1, 4)) {
    const label = svgEl(doc, "text", {
      x: String(MARGIN.left - 6),
      y: String(sy(t) + 4),
      "text-anchor": "end",
      class: "tick",
    });
    label.textContent = formatTick(t);
    svg.appendChild(label);
  }
  if (options.xLabel) {
    const label = svgEl(doc, "text", {
      x: String((MARGIN.left + width - MARGIN.right) / 2),
      y: String(height - 4),
      "text-anchor": "middle",
      class: "axis-label",
    });
    label.textContent = options.xLabel;
    svg.appendChild(label);
  }
  if (options.yLabel) {
    const label = svgEl(doc, "text", {
      x: "12",
      y: String(MARGIN.top + 4),
      class: "axis-label",
    });
    label.textContent = options.yLabel;
    svg.appendChild(label);
  }

  for (const marker of options.markers ?? []) {
    const gx = sx(marker.x);
    svg.appendChild(
      svgEl(doc, "line", {
        x1: String(gx),
        y1: String(MARGIN.top),
        x2: String(gx),
        y2: String(height - MARGIN.bottom),
        stroke: marker.color ?? "#c22",
        "stroke-dasharray": "4 3",
        class: "marker",
        "data-label": marker.label,
      }),
    );
    const label = svgEl(doc, "text", {
      x: String(gx + 4),
      y: String(MARGIN.top + 10),
      class: "marker-label",
    });
    label.textContent = marker.label;
    svg.appendChild(label);
  }

  let legendY = MARGIN.top + 8;
  for (const s of series) {
    let d = "";
    let pen = false;
    let drawn = 0;
    for (const p of s.points) {
      if (p === null || !Number.isFinite(p.y)) {
        pen = false;
        continue;
      }
      d += `${pen ? " L" : " M"}${sx(p.x).toFixed(2)} ${sy(p.y).toFixed(2)}`;
      pen = true;
      drawn += 1;
    }
    const path = svgEl(doc, "path", {
      d,
      fill: "none",
      stroke: s.color,
      "stroke-width": "1.8",
      class: "series-line",
      "data-label": s.label,
      "data-points": String(drawn),
    });
    if (s.dashed) path.setAttribute("stroke-dasharray", "5 4");
    svg.appendChild(path);

    const legend = svgEl(doc, "text", {
      x: String(width - MARGIN.right - 4),
      y: String(legendY),
      "text-anchor": "end",
      fill: s.color,
      class: "legend",
    });
    legend.textContent = s.label;
    svg.appendChild(legend);
    legendY += 14;
  }

  target.replaceChildren(svg);
  return svg;
}
