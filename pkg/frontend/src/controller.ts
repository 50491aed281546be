import { api, ApiError } from "./api.js";
import type { FilterState } from "./types.js";
import {
  hideErrorBanner,
  renderEmptyState,
  renderMainDashboard,
  renderOtherGenders,
  showErrorBanner,
} from "./views.js";

// One controller owns the content area: every filter change cancels the
// in-flight fetch, and a failed fetch leaves the last good view in place
// behind an error banner.
export class Dashboard {
  private controller: AbortController | null = null;
  private filter: FilterState = { view: "main" };

  constructor(
    private readonly banner_host: HTMLElement,
    private readonly content: HTMLElement,
  ) {}

  get state(): FilterState {
    return { ...this.filter };
  }

  async setFilter(filter: FilterState): Promise<void> {
    this.filter = { ...filter };
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    try {
      if (filter.view === "other") {
        const view = await api.other(controller.signal);
        if (controller.signal.aborted) return;
        renderOtherGenders(this.content, view);
      } else {
        const [summary, series] = await Promise.all([
          api.summary(filter, controller.signal),
          api.series(filter, controller.signal),
        ]);
        if (controller.signal.aborted) return;
        renderMainDashboard(this.content, summary, series);
      }
      hideErrorBanner(this.banner_host);
    } catch (error) {
      if (controller.signal.aborted) return;
      if (error instanceof ApiError && error.status === 422) {
        renderEmptyState(this.content, "No articles match this filter.");
        hideErrorBanner(this.banner_host);
        return;
      }
      const message =
        error instanceof Error ? error.message : "Request failed";
      showErrorBanner(this.banner_host, message);
    }
  }
}
