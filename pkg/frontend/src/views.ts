import { barList, histogram, pieChart, pieLegend } from "./charts.js";
import { fmtAge, fmtCount } from "./format.js";
import type { OtherGenders, SeriesPoint, Summary } from "./types.js";

function kpiCard(label: string, value: string, field: string): HTMLDivElement {
  const card = document.createElement("div");
  card.className = "kpi";
  const heading = document.createElement("h3");
  heading.textContent = label;
  const figure = document.createElement("p");
  figure.className = "kpi-value";
  figure.dataset.field = field;
  figure.textContent = value;
  card.append(heading, figure);
  return card;
}

function section(title: string, ...children: Element[]): HTMLElement {
  const element = document.createElement("section");
  const heading = document.createElement("h2");
  heading.textContent = title;
  element.appendChild(heading);
  element.append(...children);
  return element;
}

export function renderMainDashboard(
  container: HTMLElement,
  summary: Summary,
  series: SeriesPoint[],
): void {
  const kpis = document.createElement("div");
  kpis.className = "kpi-row";
  kpis.append(
    kpiCard("Articles", fmtCount(summary.article_count), "article_count"),
    kpiCard("Average age", fmtAge(summary.avg_age), "avg_age"),
    kpiCard("Ages sampled", fmtCount(summary.age_sample_size), "age_sample_size"),
  );
  container.replaceChildren(
    kpis,
    section(
      "Gender distribution",
      pieChart(summary.gender_distribution),
      pieLegend(summary.gender_distribution),
    ),
    section("Articles published per year", histogram(series)),
  );
}

export function renderOtherGenders(container: HTMLElement, view: OtherGenders): void {
  if (view.genders.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No articles with genders beyond male/female in this dataset.";
    container.replaceChildren(empty);
    return;
  }
  const genderBars = barList(
    view.genders.map((entry) => ({ label: entry.gender, count: entry.count })),
  );
  const yearBars = barList(
    view.years.map((entry) => ({ label: String(entry.year), count: entry.count })),
  );
  const table = document.createElement("table");
  table.className = "subclass-table";
  const head = document.createElement("tr");
  for (const column of ["Subclass", "Articles", "Average age"]) {
    const cell = document.createElement("th");
    cell.textContent = column;
    head.appendChild(cell);
  }
  table.appendChild(head);
  for (const entry of view.subclasses) {
    const row = document.createElement("tr");
    row.dataset.subclass = entry.subclass;
    const name = document.createElement("td");
    name.textContent = entry.subclass;
    const count = document.createElement("td");
    count.dataset.field = "count";
    count.textContent = fmtCount(entry.count);
    const age = document.createElement("td");
    age.dataset.field = "avg_age";
    age.textContent = fmtAge(entry.avg_age);
    row.append(name, count, age);
    table.appendChild(row);
  }
  container.replaceChildren(
    section("Articles by gender", genderBars),
    section("Articles by year", yearBars),
    section("Subclasses", table),
  );
}

export function renderEmptyState(container: HTMLElement, message: string): void {
  const empty = document.createElement("p");
  empty.className = "empty-state";
  empty.textContent = message;
  container.replaceChildren(empty);
}

export function showErrorBanner(host: HTMLElement, message: string): void {
  let banner = host.querySelector<HTMLElement>(".error-banner");
  if (!banner) {
    banner = document.createElement("div");
    banner.className = "error-banner";
    host.prepend(banner);
  }
  banner.textContent = message;
  banner.hidden = false;
}

export function hideErrorBanner(host: HTMLElement): void {
  const banner = host.querySelector<HTMLElement>(".error-banner");
  if (banner) banner.hidden = true;
}
