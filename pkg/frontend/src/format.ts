// The single formatting boundary between API numbers and rendered text.
// Snapshot tests assert rendered strings equal these helpers applied to the
// recorded payloads, so any silent recomputation shows up as a diff.

export function fmt2(value: number): string {
  return value.toFixed(2);
}

export function fmtCount(value: number): string {
  return String(value);
}

export function fmtAge(value: number | null): string {
  return value === null ? "n/a" : fmt2(value);
}

const PALETTE = [
  "#4c78a8",
  "#f58518",
  "#54a24b",
  "#e45756",
  "#72b7b2",
  "#b279a2",
  "#eeca3b",
  "#9d755d",
];

// Stable label -> color mapping (hash, not insertion order) so a gender
// keeps its color across views and sessions.
export function colorFor(label: string): string {
  let hash = 0;
  for (let i = 0; i < label.length; i++) {
    hash = (hash * 31 + label.charCodeAt(i)) >>> 0;
  }
  return PALETTE[hash % PALETTE.length]!;
}
