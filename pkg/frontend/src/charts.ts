import { colorFor, fmt2, fmtCount } from "./format.js";
import type { GenderShare, SeriesPoint } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attributes: Record<string, string>,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attributes)) {
    node.setAttribute(key, value);
  }
  return node;
}

// Pie slice angles come straight from the payload percents; the only math
// here is mapping a fraction of 360 degrees onto an arc path.
export function pieChart(shares: GenderShare[]): SVGSVGElement {
  const svg = svgElement("svg", {
    viewBox: "-1.1 -1.1 2.2 2.2",
    class: "pie",
    role: "img",
  });
  let angle = -Math.PI / 2;
  for (const share of shares) {
    const sweep = (share.percent / 100) * 2 * Math.PI;
    const end = angle + sweep;
    const largeArc = sweep > Math.PI ? 1 : 0;
    const x0 = Math.cos(angle);
    const y0 = Math.sin(angle);
    const x1 = Math.cos(end);
    const y1 = Math.sin(end);
    const path = svgElement("path", {
      d: `M 0 0 L ${x0.toFixed(5)} ${y0.toFixed(5)} A 1 1 0 ${largeArc} 1 ${x1.toFixed(5)} ${y1.toFixed(5)} Z`,
      fill: colorFor(share.gender),
      "data-gender": share.gender,
      "data-percent": fmt2(share.percent),
    });
    const title = svgElement("title", {});
    title.textContent = `${share.gender}: ${fmt2(share.percent)}% (${fmtCount(share.count)})`;
    path.appendChild(title);
    svg.appendChild(path);
    angle = end;
  }
  return svg;
}

export function pieLegend(shares: GenderShare[]): HTMLUListElement {
  const list = document.createElement("ul");
  list.className = "legend";
  for (const share of shares) {
    const item = document.createElement("li");
    item.dataset.gender = share.gender;
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.backgroundColor = colorFor(share.gender);
    const label = document.createElement("span");
    label.className = "legend-label";
    label.textContent = `${share.gender} ${fmt2(share.percent)}%`;
    item.append(swatch, label);
    list.appendChild(item);
  }
  return list;
}

// Publication-year histogram; bar heights scale to the tallest count.
export function histogram(series: SeriesPoint[]): HTMLDivElement {
  const container = document.createElement("div");
  container.className = "histogram";
  const max = series.reduce((acc, point) => Math.max(acc, point.count), 0);
  for (const point of series) {
    const bar = document.createElement("div");
    bar.className = "bar";
    bar.dataset.year = String(point.year);
    bar.dataset.count = fmtCount(point.count);
    bar.style.height = max > 0 ? `${(point.count / max) * 100}%` : "0%";
    bar.title = `${point.year}: ${fmtCount(point.count)} articles`;
    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = String(point.year);
    bar.appendChild(label);
    container.appendChild(bar);
  }
  return container;
}

export function barList(
  entries: { label: string; count: number }[],
): HTMLUListElement {
  const list = document.createElement("ul");
  list.className = "bar-list";
  const max = entries.reduce((acc, entry) => Math.max(acc, entry.count), 0);
  for (const entry of entries) {
    const item = document.createElement("li");
    item.dataset.label = entry.label;
    const name = document.createElement("span");
    name.className = "bar-name";
    name.textContent = entry.label;
    const bar = document.createElement("span");
    bar.className = "bar-fill";
    bar.style.width = max > 0 ? `${(entry.count / max) * 100}%` : "0%";
    bar.style.backgroundColor = colorFor(entry.label);
    const count = document.createElement("span");
    count.className = "bar-count";
    count.textContent = fmtCount(entry.count);
    item.append(name, bar, count);
    list.appendChild(item);
  }
  return list;
}
