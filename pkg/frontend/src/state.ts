import type { WhatifElement, WhatifRequest } from "./types.js";

/**
 * Scenario state: sparse base entries (untouched fields stay missing) plus
 * named what-if variants as feature-override maps. The console holds one
 * scenario at a time; responses are stored per panel after each run.
 */

export const MAX_VARIANTS = 16;

export interface Variant {
  name: string;
  overrides: Record<string, number | null>;
}

export interface ScenarioState {
  base: Record<string, number>;
  variants: Variant[];
  /** last responses, index 0 = base, index i+1 = variants[i] */
  responses: WhatifElement[] | null;
}

export function emptyScenario(): ScenarioState {
  return { base: {}, variants: [], responses: null };
}

export function setBase(state: ScenarioState, values: Record<string, number>): ScenarioState {
  return { ...state, base: { ...values } };
}

export function addVariant(state: ScenarioState, variant: Variant): ScenarioState {
  if (state.variants.length >= MAX_VARIANTS) {
    throw new Error(`at most ${MAX_VARIANTS} variants per scenario`);
  }
  return { ...state, variants: [...state.variants, variant] };
}

export function removeVariant(state: ScenarioState, index: number): ScenarioState {
  const variants = state.variants.filter((_, i) => i !== index);
  return { ...state, variants };
}

/** The exact request body a run submits; blank/omitted fields never appear. */
export function buildWhatifRequest(state: ScenarioState, calibrated = true): WhatifRequest {
  return {
    base: { features: { ...state.base }, calibrated },
    overrides: state.variants.map((v) => ({ ...v.overrides })),
  };
}

export function withResponses(state: ScenarioState, responses: WhatifElement[]): ScenarioState {
  return { ...state, responses };
}

/** Serializable scenario file; round-trips to an identical request payload. */
export interface ScenarioFile {
  version: 1;
  base: Record<string, number>;
  variants: Variant[];
}

export function exportScenario(state: ScenarioState): string {
  const file: ScenarioFile = { version: 1, base: state.base, variants: state.variants };
  return JSON.stringify(file, null, 1);
}

export function importScenario(text: string): ScenarioState {
  const parsed = JSON.parse(text) as Partial<ScenarioFile>;
  if (parsed.version !== 1 || typeof parsed.base !== "object" || parsed.base === null) {
    throw new Error("not a scenario file (version 1 expected)");
  }
  const variants = (parsed.variants ?? []).map((v) => ({
    name: String(v.name),
    overrides: { ...v.overrides },
  }));
  if (variants.length > MAX_VARIANTS) {
    throw new Error(`scenario has ${variants.length} variants; limit is ${MAX_VARIANTS}`);
  }
  return { base: { ...parsed.base }, variants, responses: null };
}
