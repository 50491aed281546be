import { api } from "./api.js";
import { Dashboard } from "./controller.js";
import { downloadCsv } from "./csv.js";
import type { FilterState, View } from "./types.js";

function readFilter(): FilterState {
  const view = (document.querySelector<HTMLInputElement>(
    "input[name=view]:checked",
  )?.value ?? "main") as View;
  const subclass = document.querySelector<HTMLSelectElement>("#subclass")?.value;
  const yearFrom = document.querySelector<HTMLInputElement>("#year-from")?.value;
  const yearTo = document.querySelector<HTMLInputElement>("#year-to")?.value;
  const filter: FilterState = { view };
  if (subclass) filter.subclass = subclass;
  if (yearFrom) filter.yearFrom = Number(yearFrom);
  if (yearTo) filter.yearTo = Number(yearTo);
  return filter;
}

async function boot(): Promise<void> {
  const bannerHost = document.querySelector<HTMLElement>("#banner-host")!;
  const content = document.querySelector<HTMLElement>("#content")!;
  const dashboard = new Dashboard(bannerHost, content);

  const subclassSelect = document.querySelector<HTMLSelectElement>("#subclass")!;
  try {
    const subclasses = await api.subclasses(new AbortController().signal);
    for (const name of subclasses) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      subclassSelect.appendChild(option);
    }
  } catch {
    // The filter stays usable without the list; the first fetch will
    // surface any connectivity problem in the banner.
  }

  const refresh = () => void dashboard.setFilter(readFilter());
  for (const selector of ["#subclass", "#year-from", "#year-to"]) {
    document.querySelector(selector)?.addEventListener("change", refresh);
  }
  for (const radio of document.querySelectorAll("input[name=view]")) {
    radio.addEventListener("change", refresh);
  }
  document.querySelector("#download")?.addEventListener("click", async () => {
    const filter = readFilter();
    const signal = new AbortController().signal;
    if (filter.view === "other") {
      const view = await api.other(signal);
      downloadCsv("other-genders.csv", view.genders);
    } else {
      const summary = await api.summary(filter, signal);
      downloadCsv("gender-distribution.csv", summary.gender_distribution);
    }
  });

  refresh();
}

document.addEventListener("DOMContentLoaded", () => void boot());
