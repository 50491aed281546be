// Per-view CSV download of the raw API payload rows, nothing recomputed.

function escapeCell(value: unknown): string {
  const text = value === null || value === undefined ? "" : String(value);
  if (/[",\n]/.test(text)) {
    return `"${text.replace(/"/g, '""')}"`;
  }
  return text;
}

export function toCsv<T extends object>(rows: T[]): string {
  if (rows.length === 0) return "";
  const header = Object.keys(rows[0]!);
  const lines = [header.join(",")];
  for (const row of rows) {
    lines.push(
      header
        .map((key) => escapeCell((row as Record<string, unknown>)[key]))
        .join(","),
    );
  }
  return lines.join("\n") + "\n";
}

export function downloadCsv<T extends object>(filename: string, rows: T[]): void {
  const blob = new Blob([toCsv(rows)], { type: "text/csv;charset=utf-8" });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}
