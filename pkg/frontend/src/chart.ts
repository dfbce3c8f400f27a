/**
 * Chart rendering from resolved chart contexts: bar/line/point SVG with
 * focus highlighting, falling back to a plain table when drawing fails.
 */

import type { CellValue, ChartContext } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 420;
const HEIGHT = 230;
const PAD = 10;
const LABEL_H = 16;

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) {
    el.setAttribute(k, v);
  }
  return el;
}

function drawSvg(ctx: ChartContext, focusValues: Set<CellValue>): SVGSVGElement {
  const values = ctx.table.map(([, v]) => v);
  const keys = ctx.table.map(([k]) => k);
  if (values.length === 0) {
    throw new Error("empty table");
  }
  const vmax = Math.max(...values, 0);
  const vmin = Math.min(...values, 0);
  const span = vmax - vmin || 1;
  const plotW = WIDTH - 2 * PAD;
  const plotH = HEIGHT - 2 * PAD - LABEL_H;
  const yOf = (v: number) => PAD + plotH * (1 - (v - vmin) / span);
  const step = plotW / values.length;

  const svg = svgEl("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    class: `chart chart-${ctx.spec.mark}`,
    role: "img",
  });

  const coords: [number, number][] = [];
  keys.forEach((key, i) => {
    const cx = PAD + step * (i + 0.5);
    const v = values[i];
    coords.push([cx, yOf(v)]);
    const hot = focusValues.has(key);
    const cls = hot ? "mark focus" : "mark";
    if (ctx.spec.mark === "bar") {
      const bw = step * 0.7;
      const y0 = yOf(0);
      const y1 = yOf(v);
      svg.appendChild(
        svgEl("rect", {
          class: cls,
          x: String(cx - bw / 2),
          y: String(Math.min(y0, y1)),
          width: String(bw),
          height: String(Math.max(Math.abs(y0 - y1), 1)),
        }),
      );
    } else {
      svg.appendChild(
        svgEl("circle", { class: cls, cx: String(cx), cy: String(yOf(v)), r: "4" }),
      );
    }
    const label = svgEl("text", {
      class: "xlabel",
      x: String(cx),
      y: String(HEIGHT - PAD),
      "text-anchor": "middle",
    });
    label.textContent = String(key);
    svg.appendChild(label);
  });

  if (ctx.spec.mark === "line") {
    svg.insertBefore(
      svgEl("polyline", {
        class: "series",
        points: coords.map(([x, y]) => `${x},${y}`).join(" "),
        fill: "none",
      }),
      svg.firstChild,
    );
  }
  return svg;
}

function tableFallback(ctx: ChartContext): HTMLElement {
  const table = document.createElement("table");
  table.className = "chart-fallback";
  const head = table.insertRow();
  [ctx.dimension, ctx.measures.map(([c, a]) => `${a}(${c})`).join(", ")].forEach((h) => {
    const th = document.createElement("th");
    th.textContent = h;
    head.appendChild(th);
  });
  for (const [key, value] of ctx.table) {
    const row = table.insertRow();
    row.insertCell().textContent = String(key);
    row.insertCell().textContent = String(value);
  }
  return table;
}

/**
 * Draw a chart with the given fact's focus values highlighted; any drawing
 * failure degrades to a tabular view of the aggregated data.
 */
export function renderChart(
  ctx: ChartContext,
  focusValues: Iterable<CellValue> = [],
): Element {
  try {
    return drawSvg(ctx, new Set(focusValues));
  } catch {
    return tableFallback(ctx);
  }
}
