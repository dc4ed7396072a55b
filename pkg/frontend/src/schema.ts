import type { ModelMeta } from "./types.js";

/**
 * Client-side entry validation mirroring the server's rules: a field is
 * either blank (missing) or a finite number, and only schema feature names
 * may appear.
 */

export type EntryError = { field: string; message: string };

export function knownNames(meta: ModelMeta): Set<string> {
  return new Set(meta.features.map((f) => f.name));
}

/** Parse one text-box value; blank means "not entered" (missing). */
export function parseEntry(raw: string): number | null | "invalid" {
  const trimmed = raw.trim();
  if (trimmed === "") return null;
  const value = Number(trimmed);
  if (!Number.isFinite(value)) return "invalid";
  return value;
}

/**
 * Validate a name -> raw text map against the schema. Returns the numeric
 * entries (blanks omitted) plus any violations; a submission must be
 * blocked while violations exist.
 */
export function validateEntries(
  meta: ModelMeta,
  raw: Record<string, string>,
): { values: Record<string, number>; errors: EntryError[] } {
  const names = knownNames(meta);
  const values: Record<string, number> = {};
  const errors: EntryError[] = [];
  for (const [field, text] of Object.entries(raw)) {
    if (!names.has(field)) {
      errors.push({ field, message: `unknown feature ${field}` });
      continue;
    }
    const parsed = parseEntry(text);
    if (parsed === "invalid") {
      errors.push({ field, message: "must be a finite number" });
    } else if (parsed !== null) {
      values[field] = parsed;
    }
  }
  return { values, errors };
}
