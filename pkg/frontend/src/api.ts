import type { FilterState, OtherGenders, SeriesPoint, Summary } from "./types.js";

// A FilterState maps to exactly one URL per endpoint (parameter order is
// fixed), so identical states always issue identical requests.

function query(filter: FilterState, extra?: Record<string, string>): string {
  const params = new URLSearchParams();
  if (filter.subclass) params.set("subclass", filter.subclass);
  if (filter.yearFrom !== undefined) params.set("year_from", String(filter.yearFrom));
  if (filter.yearTo !== undefined) params.set("year_to", String(filter.yearTo));
  for (const [key, value] of Object.entries(extra ?? {})) params.set(key, value);
  const text = params.toString();
  return text ? `?${text}` : "";
}

export function summaryUrl(filter: FilterState): string {
  return `/api/summary${query(filter)}`;
}

export function seriesUrl(filter: FilterState, gender?: string): string {
  return `/api/series${query(filter, gender ? { gender } : undefined)}`;
}

export function otherUrl(): string {
  return "/api/other";
}

export function subclassesUrl(): string {
  return "/api/subclasses";
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`API ${status}: ${detail}`);
  }
}

async function getJson<T>(url: string, signal: AbortSignal): Promise<T> {
  const response = await fetch(url, { signal });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export const api = {
  subclasses: (signal: AbortSignal) => getJson<string[]>(subclassesUrl(), signal),
  summary: (filter: FilterState, signal: AbortSignal) =>
    getJson<Summary>(summaryUrl(filter), signal),
  series: (filter: FilterState, signal: AbortSignal, gender?: string) =>
    getJson<SeriesPoint[]>(seriesUrl(filter, gender), signal),
  other: (signal: AbortSignal) => getJson<OtherGenders>(otherUrl(), signal),
};
