/**
 * Display formatting. Every formatter keeps the exact response value
 * available: panels show the rounded text and carry the raw value verbatim
 * in the tooltip, so no client-side number ever replaces a served one.
 */

export function formatProbability(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}

export function formatDays(value: number): string {
  return value.toFixed(2);
}

export function formatAttribution(value: number): string {
  const sign = value >= 0 ? "+" : "";
  return `${sign}${value.toFixed(4)}`;
}

/** Tooltip text: the untouched JSON number. */
export function rawTooltip(value: number): string {
  return String(value);
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
