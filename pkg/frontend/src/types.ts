// Shapes of the wgd API payloads. Every displayed number comes verbatim
// from these; the UI formats but never recomputes.

export interface GenderShare {
  gender: string;
  count: number;
  percent: number;
}

export interface Summary {
  article_count: number;
  avg_age: number | null;
  age_sample_size: number;
  gender_distribution: GenderShare[];
}

export interface SeriesPoint {
  year: number;
  count: number;
  percent_of_year: number;
}

export interface OtherGenders {
  genders: { gender: string; count: number }[];
  years: { year: number; count: number }[];
  subclasses: { subclass: string; count: number; avg_age: number | null }[];
}

export type View = "main" | "other";

export interface FilterState {
  view: View;
  subclass?: string;
  yearFrom?: number;
  yearTo?: number;
}
